"""Shared fixtures: bundled example systems and solved twin instances."""

from __future__ import annotations

import numpy as np
import pytest

from gasnet.nondim import default_scales, nondimensionalize, nondimensionalize_profiles
from gasnet.refinement import refine_graph
from gasnet.simulate import simulate_network
from gasnet.synthetic import six_node_network, six_node_profiles


@pytest.fixture(scope="session")
def six_net():
    return six_node_network()


@pytest.fixture(scope="session")
def six_prof():
    return six_node_profiles()


@pytest.fixture(scope="session")
def six_refined(six_net, six_prof):
    """Refined six-node network plus its nondimensional profiles."""
    scales = default_scales(six_net.gas)
    ndnet, ndprof = nondimensionalize(six_net, six_prof, scales)
    refined = refine_graph(ndnet, 10.0e3 / scales.length)
    return refined, ndprof


@pytest.fixture(scope="session")
def six_solution(six_net, six_prof):
    """One converged transient on the six-node system, shared read-only."""
    state, refined, dae = simulate_network(six_net, six_prof)
    return state, refined, dae


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)


def make_alpha(dae):
    """Compressor weight arrays of a CircularDae as plain copies."""
    return dae.alpha_lo.copy(), dae.alpha_hi.copy()


def build_random_instance(rng, n_nodes, n_steps=6, delta_km=20.0, horizon=10.0):
    """Random network, refinement, boundary profiles and assembled system."""
    from gasnet.dae import CircularDae
    from gasnet.network import network_from_dict
    from gasnet.nondim import NondimProfiles
    from gasnet.timeseries import TimeGrid

    from oracles import random_network_dict

    net = network_from_dict(random_network_dict(rng, n_nodes))
    scales = default_scales(net.gas)
    from gasnet.nondim import nondimensionalize_network

    ndnet = nondimensionalize_network(net, scales)
    refined = refine_graph(ndnet, delta_km * 1e3 / scales.length)
    grid = TimeGrid(horizon=horizon, n_steps=n_steps)
    b = refined.n_slack
    m0 = refined.n_original - b
    ndprof = NondimProfiles(
        grid=grid,
        supply=rng.uniform(0.8, 1.2, size=(b, n_steps)),
        withdrawal=rng.uniform(-0.3, 0.5, size=(m0, n_steps)),
        ratio={
            cid: rng.uniform(1.0, 1.6, size=n_steps)
            for cid, _, _ in ndnet.compressors
        },
    )
    return net, refined, ndprof, CircularDae(refined, ndprof)


def random_state(rng, dae):
    """A generic (infeasible) state of the right shapes for residual checks."""
    density = rng.uniform(0.5, 1.5, size=(dae.M, dae.N))
    flux = rng.uniform(-1.0, 1.0, size=(dae.E, dae.N))
    withdrawal = rng.uniform(-0.4, 0.6, size=(dae.M0, dae.N))
    friction = dae.refined.parent_friction * rng.uniform(0.5, 2.0, size=dae.P)
    return density, flux, withdrawal, friction


@pytest.fixture(scope="session")
def six_files(tmp_path_factory, six_net, six_prof):
    """Network JSON and profile CSV written once for CLI tests."""
    from gasnet.network import save_network
    from gasnet.timeseries import write_profiles

    root = tmp_path_factory.mktemp("sixnode")
    net_path = root / "network.json"
    prof_path = root / "profiles.csv"
    save_network(six_net, str(net_path))
    write_profiles(str(prof_path), six_prof)
    return str(net_path), str(prof_path)
