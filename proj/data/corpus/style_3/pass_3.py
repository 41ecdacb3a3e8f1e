GREETING = (
    "hello from a string that was wrapped across lines "
    "to stay inside the limit"
)


def greet(name):
    return GREETING + ": " + name
