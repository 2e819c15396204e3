"""Shared fixtures: degenerate genomes and quick (reduced-budget) fitness configs."""

import pytest

from optevo.graph import Genome, Graph, Node


@pytest.fixture
def const1_genome():
    """U = 1: a constant update that cannot converge on the sphere."""
    return Genome(Graph([], Node(0, "x", ["one"])), "none", "fixture:const1")


@pytest.fixture
def neg_g_genome():
    """U = -g: gradient ascent, diverges at every learning rate."""
    return Genome(Graph([], Node(0, "neg", ["g"])), "none", "fixture:neg_g")


@pytest.fixture
def identity_genome():
    """U = g: plain SGD shape."""
    return Genome(Graph([], Node(0, "x", ["g"])), "none", "fixture:identity")


def quick_fitness_config(**overrides):
    from optevo.surrogate import make_fitness_config

    kw = dict(sweep_steps=150, full_steps=1200, grace=300)
    kw.update(overrides)
    return make_fitness_config("two_moons", **kw)
