import os
import shutil
from contextlib import AbstractContextManager, contextmanager
from typing import IO

from rdsc.util import add_temp_prefix


class LocalFs:
    def __init__(self, root: str):
        self._root = root

    def abs(self, *segments: str) -> str:
        return os.path.abspath(os.path.join(self._root, *segments))

    @contextmanager
    def transact(self, dest_dir: str) -> AbstractContextManager['LocalFs']:
        """Write `dest_dir` under a temp name. An existing `dest_dir` is replaced only when the block succeeds."""
        path = self.abs(dest_dir)
        temp_dir = add_temp_prefix(path)
        try:
            yield LocalFs(temp_dir)
        except Exception as ex:
            shutil.rmtree(temp_dir, ignore_errors=True)
            raise ex
        if os.path.exists(temp_dir):
            if os.path.isdir(path):
                shutil.rmtree(path)
            os.rename(temp_dir, path)

    def open(self, loc: str, mode: str) -> IO:
        path = self.abs(loc)
        if mode[0] in 'wax':
            os.makedirs(os.path.dirname(path), exist_ok=True)
        return open(path, mode)

    def write_text(self, loc: str, text: str) -> None:
        with self.open(loc, 'w') as f:
            f.write(text)

