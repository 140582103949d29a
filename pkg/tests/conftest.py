"""Shared fixtures: reference domain, meshes, spaces and material."""

import numpy as np
import pytest

from crcontact.assembly import assemble_stiffness
from crcontact.cli import example_51_config
from crcontact.material import MaterialModel
from crcontact.mesh import generate_structured, refine_uniform
from crcontact.space import CRFunction, build_space


@pytest.fixture(scope="session")
def config():
    """The built-in preset: clamped square with bottom contact."""
    return example_51_config()


@pytest.fixture(scope="session")
def domain(config):
    return config.domain


@pytest.fixture(scope="session")
def material(config):
    return config.material


@pytest.fixture(scope="session")
def mesh2(domain):
    return generate_structured(domain, 2)


@pytest.fixture(scope="session")
def mesh4(domain):
    return generate_structured(domain, 4)


@pytest.fixture(scope="session")
def space2(mesh2):
    return build_space(mesh2)


@pytest.fixture(scope="session")
def space4(mesh4):
    return build_space(mesh4)


@pytest.fixture(scope="session")
def system2(space2, material, config):
    return assemble_stiffness(space2, material, config.rho)


@pytest.fixture(scope="session")
def refined2(mesh2):
    return refine_uniform(mesh2)


def random_cr(space, rng, scale=1.0):
    """A CR function with independent standard-normal coefficients."""
    return CRFunction(space, scale * rng.standard_normal(space.n_dofs_free))
