"""Statistics helpers documented in the wrong style."""


def mean(values):
    """Compute the mean.

    Parameters
    ----------
    values : list of float
        The sample.

    Returns
    -------
    float
        The arithmetic mean.
    """
    return sum(values) / len(values)
