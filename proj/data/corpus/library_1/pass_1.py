from pathlib import Path


def read_notes(workdir):
    return Path(workdir, "notes.txt").read_text()
