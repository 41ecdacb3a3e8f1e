def route(kind, size):
    if kind == "a":
        if size > 1:
            out = "a-big"
        else:
            out = "a-small"
    elif kind == "b":
        if size > 1:
            out = "b-big"
        else:
            out = "b-small"
    else:
        out = "other"
    return out
