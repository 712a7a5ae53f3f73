"""Schema-guided dialogue state tracking as constrained response generation."""

from importlib import resources

__version__ = "0.1.0"


def shipped_schema(lang: str = "en"):
    """Load one of the bundled Table-1 style schemas (``en`` or ``zh``)."""
    from dstforge.schema import load_schema

    return load_schema(resources.files("dstforge").joinpath(f"data/schema_{lang}.json").read_bytes())
