"""Helpers that forgot to document a function."""


def mystery(x):
    return x * 2
