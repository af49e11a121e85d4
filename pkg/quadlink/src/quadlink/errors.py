class QuadlinkError(Exception):
    """Base class for every failure raised by the pipeline."""

    def describe(self) -> str:
        module = type(self).__module__.rsplit(".", 1)[-1]
        return f"{module}.{type(self).__name__}: {self}"
