import socket


def ping(host):
    try:
        socket.create_connection((host, 80), timeout=1).close()
        return True
    except socket.error:
        return False
