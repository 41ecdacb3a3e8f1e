"""Text helpers with a sloppy summary line."""


def upper(text):
    """Uppercase the text"""
    return text.upper()
