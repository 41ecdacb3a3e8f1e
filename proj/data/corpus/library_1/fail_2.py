def head(path):
    with open(path) as f:
        return f.readline()
