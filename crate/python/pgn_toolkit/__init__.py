"""Python interface to the pgn toolkit (compiled Rust extension)."""

from .pgn_py import (  # noqa: F401
    Canvas,
    example_canvas,
    geometric_canvas,
    random_canvas,
    successive_minima,
    reduce_system,
    rigidify_system,
    realize,
    theta,
    theta_inv,
    ratio_quadruple,
)
