def parse_port(raw):
    try:
        return int(raw)
    except ValueError:
        raise OSError("bad port file")
