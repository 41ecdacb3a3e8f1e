"""Price helpers for the storefront."""


def discounted(price, rate):
    """Apply a discount rate to a price.

    Args:
        price: Base price in cents.
        rate: Fraction between 0 and 1.

    Returns:
        The discounted price in cents.
    """
    return int(price * (1 - rate))
