def total(values):
    acc = 0
    for v in values:
        if v > 0:
            acc += v
    return acc
