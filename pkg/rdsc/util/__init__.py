def add_temp_prefix(path: str) -> str:
    import datetime
    import os.path
    ts = round(datetime.datetime.now().timestamp() * 1000)
    return os.path.join(os.path.dirname(path), f'temp-{ts}-{os.path.basename(path)}')
