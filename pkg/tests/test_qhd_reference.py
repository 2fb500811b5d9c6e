"""Grid Schrodinger propagator and Madelung layer against analytic oracles."""

import math

import numpy as np
import pytest

from bohmion.errors import ConfigurationError, NormalizationError, StructureError
from bohmion.integrators import PhysicalConstants
from bohmion.potentials import Potential
from bohmion.qhd_reference import (
    HydroFields,
    WavefunctionGrid,
    collective_energy,
    dirac_energy,
    madelung_fields,
    madelung_history,
    newtonian_limit_check,
    quantum_potential,
    spectral_derivative,
    split_step_propagate,
    trace_bohmian,
)
from bohmion.sampling import random_smooth_wavefunction


def gaussian_packet(n=512, length=40.0, sigma=1.0, k0=0.0, consts=None):
    consts = consts or PhysicalConstants()
    return WavefunctionGrid.from_callable(
        lambda x: np.exp(-(x**2) / (4 * sigma**2) + 1j * k0 * x),
        n, length, consts,
    )


class TestWavefunctionGrid:
    def test_power_of_two_enforced(self, consts):
        with pytest.raises(ConfigurationError):
            WavefunctionGrid.from_callable(lambda x: np.exp(-(x**2)), 500, 40.0, consts)

    def test_norm_enforced(self, consts):
        wf = gaussian_packet()
        with pytest.raises(NormalizationError):
            WavefunctionGrid(x=wf.x, psi=2.0 * wf.psi, constants=consts,
                             potential=wf.potential)


class TestSplitStep:
    def test_harmonic_ground_state_stationary(self, consts):
        # analytic oscillator ground state (hbar = m = omega = 1)
        pot = Potential.harmonic()
        wf = WavefunctionGrid.from_callable(
            lambda x: np.exp(-(x**2) / 2.0), 512, 30.0, consts, potential=pot
        )
        hist = split_step_propagate(wf, 2.5e-4, 40_000, stride=4000)
        d0 = np.abs(hist.psis[0]) ** 2
        worst = max(
            float(np.max(np.abs(np.abs(hist.psis[i]) ** 2 - d0)))
            for i in range(hist.times.size)
        )
        assert worst <= 1e-8

    def test_free_gaussian_spreading(self, consts):
        # sigma(t)^2 = sigma0^2 + (hbar t / 2 m sigma0)^2 -> 2 at t = 2
        wf = gaussian_packet()
        hist = split_step_propagate(wf, 1e-3, 2000, stride=2000)
        d = np.abs(hist.psis[-1]) ** 2 * wf.spacing
        var = float(np.sum(wf.x**2 * d))
        assert var == pytest.approx(2.0, abs=1e-8)

    def test_norm_preserved(self, consts):
        wf = gaussian_packet()
        hist = split_step_propagate(wf, 1e-3, 1000, stride=100)
        for i in range(hist.times.size):
            assert abs(np.sum(np.abs(hist.psis[i]) ** 2) * wf.spacing - 1.0) <= 1e-12

    def test_fast_potential_warns(self, consts):
        pot = Potential.harmonic(omega=40.0)
        wf = WavefunctionGrid.from_callable(
            lambda x: np.exp(-(x**2)), 256, 30.0, consts, potential=pot
        )
        with pytest.warns(UserWarning):
            split_step_propagate(wf, 0.5, 1)


class TestMadelung:
    def test_plane_wave(self, consts):
        length = 2 * math.pi
        k = 2 * math.pi / length
        wf = WavefunctionGrid.from_callable(
            lambda x: np.exp(1j * k * x), 256, length, consts
        )
        f = madelung_fields(wf)
        assert np.max(np.abs(f.density - 1.0 / length)) <= 1e-12
        assert np.max(np.abs(f.momentum - k / length)) <= 1e-12
        assert np.max(np.abs(f.velocity - k)) <= 1e-12

    def test_real_state_has_zero_current(self, consts):
        wf = gaussian_packet()
        f = madelung_fields(wf)
        assert np.max(np.abs(f.momentum)) <= 1e-14

    def test_total_momentum_matches_spectral_expectation(self, consts, rng):
        wf = random_smooth_wavefunction(512, 20.0, consts, rng)
        f = madelung_fields(wf)
        total = float(np.sum(f.momentum) * wf.spacing)
        dpsi = spectral_derivative(wf.psi, wf.k)
        expect = float(
            np.real(np.sum(np.conj(wf.psi) * (-1j * consts.hbar) * dpsi)) * wf.spacing
        )
        assert total == pytest.approx(expect, abs=1e-10)

    def test_velocity_masked_in_vacuum(self, consts):
        wf = gaussian_packet(sigma=0.5, length=60.0)
        f = madelung_fields(wf)
        assert np.isnan(f.velocity[~f.valid]).all()


class TestCollectiveEnergy:
    def test_plane_wave_kinetic(self, consts):
        length = 2 * math.pi
        wf = WavefunctionGrid.from_callable(lambda x: np.exp(1j * x), 256, length, consts)
        f = madelung_fields(wf)
        assert collective_energy(f, wf.potential, consts) == pytest.approx(0.5, abs=1e-12)

    def test_uniform_density_zero_energy(self, consts):
        n = 256
        x = np.linspace(-1, 1, n, endpoint=False)
        f = HydroFields(
            x=x, spacing=float(x[1] - x[0]), density=np.full(n, 0.5),
            momentum=np.zeros(n), velocity=np.zeros(n), valid=np.ones(n, dtype=bool),
        )
        assert collective_energy(f, np.zeros(n), consts) == pytest.approx(0.0, abs=1e-13)

    def test_collectivization_identity_random_states(self, consts, rng):
        pot = Potential.harmonic()
        for _ in range(25):
            wf = random_smooth_wavefunction(512, 20.0, consts, rng, potential=pot)
            ref = dirac_energy(wf)
            col = collective_energy(madelung_fields(wf), wf.potential, consts)
            assert abs(col - ref) / abs(ref) <= 1e-8

    def test_negative_density_rejected(self, consts):
        n = 256
        x = np.linspace(-1, 1, n, endpoint=False)
        f = HydroFields(
            x=x, spacing=float(x[1] - x[0]), density=np.full(n, -1.0),
            momentum=np.zeros(n), velocity=np.zeros(n), valid=np.ones(n, dtype=bool),
        )
        with pytest.raises(StructureError):
            collective_energy(f, np.zeros(n), consts)


class TestQuantumPotential:
    def test_uniform_density_vanishes(self, consts):
        vq = quantum_potential(np.full(256, 0.3), 0.1, consts)
        assert np.max(np.abs(vq)) <= 1e-10

    def test_gaussian_closed_form(self, consts):
        # V_Q = -(hbar^2/2m)(x^2/4 sigma^4 - 1/2 sigma^2) for D ~ exp(-x^2/2 sigma^2)
        n, length, sigma = 1024, 40.0, 1.2
        h = length / n
        x = -length / 2 + h * np.arange(n)
        d = np.exp(-(x**2) / (2 * sigma**2))
        vq = quantum_potential(d, h, consts)
        ref = -0.5 * (x**2 / (4 * sigma**4) - 1.0 / (2 * sigma**2))
        inner = np.abs(x) < 4 * sigma
        assert np.max(np.abs(vq[inner] - ref[inner])) <= 1e-9

    def test_scaling_invariance(self, consts):
        # the ratio form kills the overall scale; compare on well-supported
        # points (near the floor, 1/sqrt(D) amplifies spectral round-off)
        n, length = 512, 30.0
        h = length / n
        x = -length / 2 + h * np.arange(n)
        d = np.exp(-(x**2) / 2.0)
        a = quantum_potential(d, h, consts)
        b = quantum_potential(10.0 * d, h, consts)
        supported = d >= 1e-6 * d.max()
        assert np.max(np.abs(a[supported] - b[supported])) <= 1e-9


class TestTraceBohmian:
    def test_stationary_eigenstate_freezes_paths(self, consts):
        pot = Potential.harmonic()
        wf = WavefunctionGrid.from_callable(
            lambda x: np.exp(-(x**2) / 2.0), 512, 30.0, consts, potential=pot
        )
        hist = split_step_propagate(wf, 1e-3, 500)
        tset = trace_bohmian(madelung_history(hist), hist.times, [-1.0, 0.0, 1.0])
        assert np.max(np.abs(tset.positions - tset.positions[:, :1])) <= 1e-6

    def test_plane_wave_drift(self, consts):
        length = 2 * math.pi
        wf = WavefunctionGrid.from_callable(
            lambda x: np.exp(2j * x), 256, length, consts
        )
        hist = split_step_propagate(wf, 1e-3, 200)
        tset = trace_bohmian(madelung_history(hist), hist.times, [0.0])
        assert tset.positions[0, -1] == pytest.approx(2.0 * 0.2, abs=1e-9)

    def test_free_gaussian_self_similar(self, consts):
        wf = gaussian_packet()
        hist = split_step_propagate(wf, 1e-3, 1000)
        seeds = np.linspace(-1.5, 1.5, 11)
        tset = trace_bohmian(madelung_history(hist), hist.times, seeds)
        sigma = np.sqrt(1.0 + (hist.times / 2.0) ** 2)
        ref = seeds[:, None] * sigma[None, :]
        assert np.max(np.abs(tset.positions - ref)) <= 1e-5
        assert tset.order_preserved()
        assert not tset.truncated.any()

    def test_escaping_seed_flagged_truncated(self, consts):
        wf = gaussian_packet(sigma=0.5, length=60.0)
        hist = split_step_propagate(wf, 1e-3, 10)
        fields = madelung_history(hist)
        lo = fields[0].x[np.nonzero(fields[0].density >= 1e-12 * fields[0].density.max())[0][0]]
        tset = trace_bohmian(fields, hist.times, [lo - 1.0, 0.0])
        assert tset.truncated[0]
        assert not tset.truncated[1]

    def test_unsorted_seeds_rejected(self, consts):
        wf = gaussian_packet()
        hist = split_step_propagate(wf, 1e-3, 5)
        with pytest.raises(ConfigurationError):
            trace_bohmian(madelung_history(hist), hist.times, [1.0, -1.0])


class TestNewtonianLimit:
    def test_free_straight_line(self, consts):
        times, q, p = newtonian_limit_check(Potential.zero(), 0.5, 1.5, 2.0, 1e-3, consts)
        assert q[-1] == pytest.approx(0.5 + 1.5 * 2.0, abs=1e-12)
        assert p[-1] == pytest.approx(1.5, abs=1e-13)

    def test_harmonic_analytic(self, consts):
        times, q, p = newtonian_limit_check(Potential.harmonic(), 0.3, 0.4, 5.0, 1e-3, consts)
        ref = 0.3 * np.cos(times) + 0.4 * np.sin(times)
        assert np.max(np.abs(q - ref)) <= 1e-9

    def test_rk4_self_consistency_order(self, consts):
        pot = Potential.double_well(height=0.5)

        def final(dt):
            _, q, _ = newtonian_limit_check(pot, 0.2, 0.3, 1.0, dt, consts)
            return q[-1]

        e1 = abs(final(2e-2) - final(1e-2))
        e2 = abs(final(1e-2) - final(5e-3))
        assert math.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)
