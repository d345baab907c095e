"""Bundled fixtures transcribed from published detection tables.

``table2``/``table3`` are the two fake faces' detections, ``table4`` the five
high-quality fakes (finger only), and ``mixed_labeled`` adds five constructed
real faces that carry whitelisted labels only.
"""

from importlib import resources

from .detections import load_fixture  # noqa: F401  (re-exported)
from .features import ContextWhitelist

FIXTURES = ("table2", "table3", "table4", "mixed_labeled")


def fixture_path(name):
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return resources.files("ooc_detect").joinpath(f"data/{name}.json")


def whitelist_path():
    return resources.files("ooc_detect").joinpath("data/face_whitelist.txt")


def load(name):
    with resources.as_file(fixture_path(name)) as path:
        return load_fixture(path)


def load_labeled(name="mixed_labeled"):
    from .harness import load_labeled_set

    with resources.as_file(fixture_path(name)) as path:
        return load_labeled_set(path)


def load_whitelist():
    with resources.as_file(whitelist_path()) as path:
        return ContextWhitelist.load(path)
