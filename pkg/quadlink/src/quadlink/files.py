import os
from contextlib import contextmanager
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import IO, Iterator, Union


@contextmanager
def atomic_writer(destination: Union[str, Path]) -> Iterator[IO[bytes]]:
    """Yields a binary handle whose content replaces destination on success.

    The data goes to a temporary file in the same directory and is renamed
    over the destination only when the block exits cleanly, so readers never
    see a truncated file.
    """
    destination = Path(destination)
    handle = NamedTemporaryFile(
        mode="wb",
        dir=destination.parent,
        prefix=f".{destination.name}.",
        suffix=".tmp",
        delete=False,
    )
    try:
        with handle:
            yield handle
        os.replace(handle.name, destination)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise


def write_atomic(destination: Union[str, Path], data: bytes) -> int:
    with atomic_writer(destination) as f:
        f.write(data)
    return len(data)
