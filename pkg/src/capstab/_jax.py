"""Shared jax setup: 64-bit floats are required for the identity tolerances."""

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402

__all__ = ["jax", "jnp"]
