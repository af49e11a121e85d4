from importlib.resources import files
from pathlib import PurePosixPath
from typing import Optional, Union


def _locate(resource_path: Union[str, PurePosixPath]):
    """Resolves a path relative to this package, refusing to leave it."""
    resource_path = PurePosixPath(resource_path)
    if resource_path.is_absolute() or ".." in resource_path.parts:
        raise ValueError(
            f"Resource path has to stay inside the package: '{resource_path}'"
        )
    return files(__name__).joinpath(*resource_path.parts)


def resource_bytes(resource_path: Union[str, PurePosixPath]) -> bytes:
    return _locate(resource_path).read_bytes()


def resource_text(
    resource_path: Union[str, PurePosixPath],
    encoding: Optional[str] = "utf-8",
) -> str:
    return _locate(resource_path).read_text(encoding=encoding)
