"""Reference ``.bsq`` modules shipped with the package."""

from importlib import resources

NAMES = ("sign", "lists", "temperature", "holes", "order", "payments")


def source(name: str) -> str:
    return resources.files(__package__).joinpath(f"{name}.bsq").read_text(encoding="utf-8")


def path(name: str):
    return resources.files(__package__).joinpath(f"{name}.bsq")


def load(name: str):
    from ..lang import check_source

    return check_source(source(name))
