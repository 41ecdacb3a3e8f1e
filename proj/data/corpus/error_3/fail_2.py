def require(path):
    import os
    if not os.path.exists(path):
        raise EnvironmentError("missing: " + path)
    return path
