def weekday(n):
    if n == 0:
        return "mon"
    elif n == 1:
        return "tue"
    elif n == 2:
        return "wed"
    elif n == 3:
        return "thu"
    elif n == 4:
        return "fri"
    elif n == 5:
        return "sat"
    return "sun"
