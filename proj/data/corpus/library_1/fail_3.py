import glob


def log_files(root):
    return sorted(glob.glob(root + "/*.log"))
