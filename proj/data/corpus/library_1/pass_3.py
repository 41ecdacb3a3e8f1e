from pathlib import Path


def python_files(root):
    return sorted(p.name for p in Path(root).glob("*.py"))
