def classify(n):
    if n < 10:
        return "tiny"
    elif n < 100:
        return "small"
    elif n < 1000:
        return "medium"
    elif n < 10000:
        return "large"
    elif n < 100000:
        return "huge"
    return "vast"
