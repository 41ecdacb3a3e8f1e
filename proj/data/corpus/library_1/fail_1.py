import os


def backup_name(path):
    if os.path.exists(path):
        return os.path.join(os.path.dirname(path), "backup.txt")
    return path
