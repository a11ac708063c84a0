"""Shared fixtures and independent oracle helpers.

The oracle functions here are deliberately written from scratch (plain
loops, math.factorial, no calls into the package's propensity/RHS code)
so the tests compare two independent derivations of the same quantity.
"""

import math

import numpy as np
import pytest

from crn_ude.dsl import parse_network


def naive_rhs(net, state, params, t=0.0):
    """Independent reaction-rate-equation evaluation: dX/dt = sum_k nu_k a_k."""
    from crn_ude.network import Algebraic, Constant, Neural, eval_expr
    from crn_ude.neural import eval_rate

    names = [s.name for s in net.species]
    out = np.zeros(len(names))
    for rxn in net.reactions:
        rate = rxn.rate
        if isinstance(rate, Constant):
            c = params[net.parameters.index(rate.param)]
        elif isinstance(rate, Algebraic):
            env = {n: state[i] for i, n in enumerate(names)}
            env["t"] = t
            for j, p in enumerate(net.parameters):
                env[p] = params[j]
            c = eval_expr(rate.expr, env)
        elif isinstance(rate, Neural):
            spec = net.neural[rate.slot]
            theta = params[net.theta_slices()[rate.slot]]
            x = np.array([state[names.index(n)] for n in rate.inputs])
            c = eval_rate(spec, theta, x)
        else:
            raise AssertionError(rate)
        a = c
        for name, count in rxn.substrates.items():
            a = a * state[names.index(name)] ** count / math.factorial(count)
        for name, count in rxn.substrates.items():
            out[names.index(name)] -= count * a
        for name, count in rxn.products.items():
            out[names.index(name)] += count * a
    return out


def random_mass_action_network(rng, max_species=4, max_reactions=5):
    """A random pure mass-action network in DSL form plus a parameter draw."""
    n_species = rng.integers(2, max_species + 1)
    names = [f"S{i}" for i in range(n_species)]
    n_rxn = rng.integers(1, max_reactions + 1)
    lines = [f"species {n} = {rng.uniform(0.5, 2.0)!r}" for n in names]
    params = []
    for k in range(n_rxn):
        pname = f"k{k}"
        params.append(pname)
        lines.append(f"param {pname} = {rng.uniform(0.1, 2.0)!r}")

        def side():
            terms = []
            for n in names:
                count = int(rng.integers(0, 3))
                if count:
                    terms.append(f"{count}{n}" if count > 1 else n)
            return " + ".join(terms) if terms else "0"

        lines.append(f"{side()} --[{pname}]--> {side()}")
    net = parse_network("\n".join(lines))
    values = np.array([net.defaults[p] for p in net.parameters])
    return net, values


@pytest.fixture
def rng():
    return np.random.default_rng(0)
