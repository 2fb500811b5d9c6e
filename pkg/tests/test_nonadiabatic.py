"""Mean-field and EF particle dynamics, quantum-geometry diagnostics."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from bohmion import nonadiabatic as na
from bohmion.ensembles import BohmionEnsemble
from bohmion.errors import ConfigurationError, DiagnosticError, StructureError
from bohmion.integrators import PhysicalConstants
from bohmion.kernels import GAUSSIAN, QuadratureGrid, SmoothingKernel
from bohmion.potentials import Potential
from bohmion.sampling import random_electronic_field


@pytest.fixture
def kernel():
    return SmoothingKernel(GAUSSIAN, 1.0)


def grid_for(kernel, q, travel=2.0):
    return QuadratureGrid.covering(kernel, q, travel=travel)


class TestElectronicModel:
    def test_linear_vibronic_structure(self):
        model = na.ElectronicModel.linear_vibronic(kappa=0.8, delta=0.3)
        model.validate([-1.0, 0.0, 2.0])
        h = model.h(0.5)
        assert h[0, 0] == pytest.approx(0.4)
        assert h[0, 1] == pytest.approx(0.3)

    def test_polynomial_model_derivative(self):
        mats = [na.SIGMA_X, 0.5 * na.SIGMA_Z, 0.25 * na.SIGMA_X]
        model = na.ElectronicModel.polynomial(mats)
        model.validate([0.0, 0.7])

    def test_non_hermitian_detected(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        model = na.ElectronicModel(dim=2, h=lambda q: bad, dh=lambda q: 0 * bad)
        with pytest.raises(StructureError):
            model.validate([0.0])

    def test_dimension_bounds(self):
        with pytest.raises(ConfigurationError):
            na.ElectronicModel(dim=1, h=lambda q: np.eye(1), dh=lambda q: np.eye(1))


class TestSmoothedHe:
    def test_constant_model_unchanged(self, consts, kernel):
        m = na.SIGMA_Z + 0.3 * na.SIGMA_X
        model = na.ElectronicModel.constant(m)
        grid = grid_for(kernel, [0.0])
        assert np.max(np.abs(na.smoothed_He(model, kernel, grid, 0.0) - m)) <= 1e-9

    def test_linear_model_unchanged(self, consts, kernel):
        # odd moments vanish: smoothing is exact on affine H_e
        model = na.ElectronicModel.linear_vibronic(kappa=1.0, delta=0.5)
        grid = grid_for(kernel, [0.7])
        out = na.smoothed_He(model, kernel, grid, 0.7)
        assert np.max(np.abs(out - model.h(0.7))) <= 1e-9

    def test_quadratic_gains_alpha_offset(self, consts):
        # H = sigma_z r^2/2 -> smoothed H = sigma_z (q^2 + alpha^2)/2
        alpha = 0.6
        kernel = SmoothingKernel(GAUSSIAN, alpha)
        model = na.ElectronicModel.polynomial(
            [np.zeros((2, 2)), np.zeros((2, 2)), 0.5 * na.SIGMA_Z]
        )
        grid = grid_for(kernel, [0.4])
        out = na.smoothed_He(model, kernel, grid, 0.4)
        expect = 0.5 * (0.4**2 + alpha**2)
        assert out[0, 0].real == pytest.approx(expect, abs=1e-9)


class TestMeanField:
    def test_constant_he_decouples(self, consts):
        model = na.ElectronicModel.constant(na.SIGMA_Z)
        state = na.MeanFieldState(q=0.0, p=0.7, psi=np.array([1.0, 1.0]) / math.sqrt(2))
        traj = na.meanfield_evolve(state, Potential.zero(), model, consts, 1e-3, 500)
        assert np.max(np.abs(traj.q - 0.7 * traj.times)) <= 1e-10
        # electronic state precesses under the fixed generator
        ref = expm(-1j * na.SIGMA_Z * traj.times[-1]) @ state.psi
        assert np.max(np.abs(traj.psi[-1] - ref)) <= 1e-10

    def test_frozen_heavy_nucleus_matches_expm(self):
        consts = PhysicalConstants(mass=1e8)
        model = na.ElectronicModel.linear_vibronic(kappa=1.0, delta=1.0)
        psi0 = np.array([1.0, 0.0], dtype=complex)
        state = na.MeanFieldState(q=0.3, p=0.0, psi=psi0)
        traj = na.meanfield_evolve(state, Potential.zero(), model, consts, 1e-3, 1000)
        ref = expm(-1j * model.h(0.3) * traj.times[-1]) @ psi0
        assert np.max(np.abs(traj.psi[-1] - ref)) <= 1e-6

    def test_conservation(self, consts):
        model = na.ElectronicModel.linear_vibronic(kappa=0.4, delta=1.0)
        state = na.MeanFieldState(q=0.2, p=0.5, psi=np.array([0.6, 0.8]))
        traj = na.meanfield_evolve(
            state, Potential.harmonic(), model, consts, 1e-3, 2000, stride=100
        )
        assert traj.energy_drift() <= 1e-8
        assert traj.norm_drift() <= 1e-12


def make_ef_state():
    return na.EFBohmionState.from_pure(
        [-0.5, 0.5], [0.3, -0.3], [0.5, 0.5],
        [np.array([1.0, 0.2]), np.array([0.3, 1.0])],
    )


class TestEFEnergy:
    def test_pure_single_particle_example(self, consts, kernel):
        # I^{KK} = 1/w = 1, hbar^2 term vanishes by purity, <rho|H_e> = 1
        model = na.ElectronicModel.constant(na.SIGMA_Z)
        state = na.EFBohmionState.from_pure([0.0], [1.0], [1.0], [np.array([1.0, 0.0])])
        grid = grid_for(kernel, [0.0])
        h = na.ef_reg_hamiltonian(state, model, kernel, grid, consts)
        assert h == pytest.approx(1.5, abs=1e-9)

    def test_mixed_single_particle_negative_quantum_term(self, consts, kernel):
        # rho = (w/2) I gives (hbar^2/4M)(w^2/2 - w^2) I^{dKdK} = -hbar^2 w/(8 M a^2)
        model = na.ElectronicModel.constant(np.zeros((2, 2)))
        state = na.EFBohmionState(
            ensemble=BohmionEnsemble(q=[0.0], p=[0.0], w=[1.0]),
            rhos=np.array([0.5 * np.eye(2, dtype=complex)]),
        )
        grid = grid_for(kernel, [0.0])
        h = na.ef_reg_hamiltonian(state, model, kernel, grid, consts)
        assert h == pytest.approx(-0.125, abs=1e-9)

    def test_far_orthogonal_pair_coupling_decays(self, consts):
        kernel = SmoothingKernel(GAUSSIAN, 0.5)
        model = na.ElectronicModel.constant(np.zeros((2, 2)))
        couplings = []
        for d in (2.0, 3.0, 4.0):
            state = na.EFBohmionState.from_pure(
                [-d / 2, d / 2], [0.0, 0.0], [0.5, 0.5],
                [np.array([1.0, 0.0]), np.array([0.0, 1.0])],
            )
            grid = grid_for(kernel, state.ensemble.q)
            couplings.append(abs(na.ef_reg_hamiltonian(state, model, kernel, grid, consts)))
        assert couplings[0] > couplings[1] > couplings[2]

    def test_trace_weight_mismatch_rejected(self, kernel):
        with pytest.raises(StructureError):
            na.EFBohmionState(
                ensemble=BohmionEnsemble(q=[0.0], p=[0.0], w=[1.0]),
                rhos=np.array([0.5 * np.diag([1.0, 0.0]).astype(complex)]),
            )


class TestEFGrad:
    def test_constant_he_zero_electronic_force(self, consts, kernel):
        model = na.ElectronicModel.constant(na.SIGMA_Z)
        state = na.EFBohmionState.from_pure([0.2], [0.0], [1.0], [np.array([1.0, 1.0])])
        grid = grid_for(kernel, [0.2])
        dq, _ = na.ef_grad(state, model, kernel, grid, consts)
        assert abs(dq[0]) <= 1e-10

    def test_linear_model_unit_slope(self, consts, kernel):
        # H_e = sigma_z r: dh/dq = <rho|sigma_z> = 1 for rho = |0><0|
        model = na.ElectronicModel.linear_vibronic(kappa=1.0, delta=0.0)
        state = na.EFBohmionState.from_pure([0.4], [0.0], [1.0], [np.array([1.0, 0.0])])
        grid = grid_for(kernel, [0.4])
        dq, _ = na.ef_grad(state, model, kernel, grid, consts)
        assert dq[0] == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("variant", na.VARIANTS)
    def test_matches_finite_differences(self, consts, kernel, rng, variant):
        model = na.ElectronicModel.linear_vibronic(kappa=0.7, delta=0.9)
        q = rng.uniform(-0.8, 0.8, 2)
        p = rng.uniform(-0.8, 0.8, 2)
        w = np.array([0.6, 0.4])
        vecs = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(2)]
        state = na.EFBohmionState.from_pure(q, p, w, vecs)
        grid = grid_for(kernel, q)
        dq, dp = na.ef_grad(state, model, kernel, grid, consts, variant=variant)
        step = 1e-6
        scale = max(1.0, float(np.max(np.abs(dq))), float(np.max(np.abs(dp))))

        def energy(qq, pp):
            st = na.EFBohmionState(
                ensemble=BohmionEnsemble(q=qq, p=pp, w=w), rhos=state.rhos
            )
            return na.ef_reg_hamiltonian(st, model, kernel, grid, consts, variant=variant)

        for c in range(2):
            qp, qm = q.copy(), q.copy()
            qp[c] += step
            qm[c] -= step
            assert (energy(qp, p) - energy(qm, p)) / (2 * step) == pytest.approx(
                dq[c], abs=1e-6 * scale
            )
            pp_, pm = p.copy(), p.copy()
            pp_[c] += step
            pm[c] -= step
            assert (energy(q, pp_) - energy(q, pm)) / (2 * step) == pytest.approx(
                dp[c], abs=1e-6 * scale
            )


class TestEFEffectiveHe:
    def test_hbar_zero_reduces_to_base(self, kernel):
        consts = PhysicalConstants(hbar=0.0)
        model = na.ElectronicModel.linear_vibronic()
        state = make_ef_state()
        grid = grid_for(kernel, state.ensemble.q)
        for variant, base in (
            ("hamiltonian", na.smoothed_He(model, kernel, grid, -0.5)),
            ("lagrangian", model.h(-0.5)),
        ):
            heff = na.ef_effective_He(state, 0, model, kernel, grid, consts, variant)
            assert np.max(np.abs(heff - base)) <= 1e-9

    def test_hermitian_by_construction(self, consts, kernel):
        model = na.ElectronicModel.linear_vibronic()
        state = make_ef_state()
        grid = grid_for(kernel, state.ensemble.q)
        heff = na.ef_effective_He(state, 1, model, kernel, grid, consts)
        assert np.max(np.abs(heff - heff.conj().T)) == 0.0

    def test_identity_component_is_inert(self, consts, kernel):
        # an identity-proportional rho_b shifts Heff but commutes with everything
        model = na.ElectronicModel.constant(na.SIGMA_Z)
        ens = BohmionEnsemble(q=[-0.3, 0.3], p=[0.0, 0.0], w=[0.5, 0.5])
        rho1 = 0.5 * np.outer([1, 0], [1, 0]).astype(complex)
        rho2 = 0.25 * np.eye(2, dtype=complex)
        state = na.EFBohmionState(ensemble=ens, rhos=np.stack([rho1, rho2]))
        traj = na.ef_evolve(state, model, kernel, None, consts, 1e-3, 200, stride=200)
        ref = expm(-1j * na.SIGMA_Z * traj.times[-1])
        expect = ref @ rho1 @ ref.conj().T
        assert np.max(np.abs(traj.rhos[-1, 0] - expect)) <= 1e-8


class TestEFEvolve:
    def test_two_level_precession(self, consts, kernel):
        model = na.ElectronicModel.constant(na.SIGMA_Z)
        state = na.EFBohmionState.from_pure(
            [0.0], [0.0], [1.0], [np.array([1.0, 1.0]) / math.sqrt(2)]
        )
        traj = na.ef_evolve(state, model, kernel, None, consts, 1e-2, 500, stride=100)
        for i, t in enumerate(traj.times):
            u = np.diag(np.exp(-1j * np.array([1.0, -1.0]) * t))
            ref = u @ state.rhos[0] @ u.conj().T
            assert np.max(np.abs(traj.rhos[i, 0] - ref)) <= 1e-10

    def test_spectra_and_traces_constant(self, consts, kernel):
        model = na.ElectronicModel.linear_vibronic(kappa=0.5, delta=1.0)
        traj = na.ef_evolve(make_ef_state(), model, kernel, None, consts, 1e-3, 500,
                            stride=50)
        assert traj.eigenvalue_drift() <= 1e-11
        assert traj.trace_drift() <= 1e-12
        assert traj.purity_drift() <= 1e-11

    def test_variants_coincide_for_constant_he(self, consts, kernel):
        model = na.ElectronicModel.constant(na.SIGMA_Z + 0.7 * na.SIGMA_X)
        state = na.EFBohmionState.from_pure([0.0], [0.5], [1.0], [np.array([1.0, 0.3j])])
        th = na.ef_evolve(state, model, kernel, None, consts, 1e-3, 400, "hamiltonian", 50)
        tl = na.ef_evolve(state, model, kernel, None, consts, 1e-3, 400, "lagrangian", 50)
        assert np.max(np.abs(th.q - tl.q)) <= 1e-10
        assert np.max(np.abs(th.rhos - tl.rhos)) <= 1e-10

    def test_variants_differ_for_linear_vibronic(self, consts, kernel):
        # same configuration, structurally different forces (nonlocal kinetic
        # term vs bare kinetic); the electronic slope itself is filter-exact
        model = na.ElectronicModel.linear_vibronic(kappa=1.0, delta=1.0)
        state = na.EFBohmionState.from_pure(
            [-0.5, 0.5], [0.4, -0.1], [0.5, 0.5],
            [np.array([1.0, 0.0]), np.array([0.0, 1.0])],
        )
        grid = grid_for(kernel, state.ensemble.q)
        dq_h, _ = na.ef_grad(state, model, kernel, grid, consts, "hamiltonian")
        dq_l, _ = na.ef_grad(state, model, kernel, grid, consts, "lagrangian")
        assert np.max(np.abs(dq_h - dq_l)) > 1e-3

    def test_requires_quantum_hbar(self, kernel):
        model = na.ElectronicModel.constant(na.SIGMA_Z)
        state = make_ef_state()
        with pytest.raises(ConfigurationError):
            na.ef_evolve(state, model, kernel, None, PhysicalConstants(hbar=0.0),
                         1e-3, 10)

    def test_composite_step_observed_order_two(self, consts, kernel):
        # half rotation / midpoint / half rotation on the coupled two-level
        # pair: successive dt halvings shrink final-state differences 4x
        model = na.ElectronicModel.linear_vibronic(kappa=0.8, delta=1.0)
        state = make_ef_state()
        grid = QuadratureGrid.covering(kernel, state.ensemble.q, travel=1.0)

        def final(dt):
            steps = int(round(1.0 / dt))
            traj = na.ef_evolve(state, model, kernel, grid, consts, dt, steps,
                                stride=steps)
            return np.concatenate(
                [traj.q[-1], traj.p[-1], traj.rhos[-1].reshape(-1).view(float)]
            )

        finals = [final(dt) for dt in (8e-3, 4e-3, 2e-3, 1e-3)]
        diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
        orders = [math.log2(a / b) for a, b in zip(diffs, diffs[1:])]
        for order in orders:
            assert order == pytest.approx(2.0, abs=0.2)


def phase_winding_field(n=1024, length=2.0 * math.pi, winding=1):
    h = length / n
    r = h * np.arange(n)
    phi0 = np.array([1.0, 0.0], dtype=complex)
    psi = np.exp(2j * math.pi * winding * r / length)[:, None] * phi0[None, :]
    return na.ElectronicField(r=r, psi=psi)


def rotor_field(n=512, length=2.0 * math.pi):
    h = length / n
    r = h * np.arange(n)
    psi = np.stack([np.cos(r), np.sin(r)], axis=1).astype(complex)
    return na.ElectronicField(r=r, psi=psi)


class TestBerryConnection:
    def test_constant_field_zero(self, consts):
        n = 256
        r = np.linspace(0, 2 * math.pi, n, endpoint=False)
        psi = np.tile(np.array([0.6, 0.8j]), (n, 1))
        f = na.ElectronicField(r=r, psi=psi)
        assert np.max(np.abs(na.berry_connection(f, consts))) <= 1e-14

    def test_pure_phase_gives_hbar_kappa(self, consts):
        f = phase_winding_field(winding=2)
        a = na.berry_connection(f, consts)
        assert np.max(np.abs(a - 2.0)) <= 1e-7

    def test_real_field_zero(self, consts):
        f = rotor_field()
        assert np.max(np.abs(na.berry_connection(f, consts))) <= 1e-12

    def test_residue_check_fires_for_unnormalized(self, consts):
        f = rotor_field()
        f.psi = f.psi * (1.0 + 0.05 * np.sin(f.r))[:, None]
        with pytest.raises(DiagnosticError):
            na.berry_connection(f, consts)


class TestQgt:
    def test_pure_phase_annihilated(self, consts):
        geom = na.qgt(phase_winding_field(), consts)
        assert np.max(np.abs(geom.q)) <= 1e-10

    def test_rotor_unit_curvature(self, consts):
        geom = na.qgt(rotor_field(), consts)
        assert np.max(np.abs(geom.q - 1.0)) <= 1e-8
        assert np.max(np.abs(geom.connection)) <= 1e-12

    def test_constant_field_zero(self, consts):
        n = 256
        r = np.linspace(0, 2 * math.pi, n, endpoint=False)
        psi = np.tile(np.array([1.0, 1.0j]) / math.sqrt(2), (n, 1))
        geom = na.qgt(na.ElectronicField(r=r, psi=psi), consts)
        assert np.max(np.abs(geom.q)) <= 1e-14

    def test_nonnegative_on_random_fields(self, consts, rng):
        for _ in range(10):
            f = random_electronic_field(256, 2 * math.pi, 3, rng)
            geom = na.qgt(f, consts)
            assert float(np.min(geom.t)) >= -1e-12


class TestEpsilonField:
    def test_constant_field_is_expectation(self, consts):
        n = 256
        r = np.linspace(0, 2 * math.pi, n, endpoint=False)
        psi = np.tile(np.array([1.0, 0.0], dtype=complex), (n, 1))
        model = na.ElectronicModel.polynomial([np.zeros((2, 2)), na.SIGMA_Z])
        rep = na.epsilon_field(na.ElectronicField(r=r, psi=psi), model, consts)
        assert np.max(np.abs(rep.epsilon - r)) <= 1e-12     # <psi|H_e(r)psi> = r

    def test_rotor_value_half(self, consts):
        model = na.ElectronicModel.constant(np.zeros((2, 2)))
        rep = na.epsilon_field(rotor_field(), model, consts)
        assert np.max(np.abs(rep.epsilon - 0.5)) <= 1e-8

    def test_identity_and_routes_converge_order_two(self, consts, rng):
        model = na.ElectronicModel.constant(np.zeros((2, 2)))
        mismatches = []
        routes = []
        for n in (128, 256, 512):
            sub = np.random.default_rng(7)
            f = random_electronic_field(n, 2 * math.pi, 2, sub)
            rep = na.epsilon_field(f, model, consts)
            mismatches.append(rep.identity_mismatch)
            routes.append(rep.route_mismatch)
        for seq in (mismatches, routes):
            orders = [math.log2(a / b) for a, b in zip(seq, seq[1:])]
            for order in orders:
                assert order == pytest.approx(2.0, abs=0.35)


class TestBerryLoopPhase:
    def test_winding_one_gives_two_pi_hbar(self, consts):
        loop = na.berry_loop_phase(phase_winding_field(), consts)
        assert loop == pytest.approx(2.0 * math.pi, abs=1e-9)

    def test_constant_field_zero(self, consts):
        n = 256
        r = np.linspace(0, 2 * math.pi, n, endpoint=False)
        psi = np.tile(np.array([1.0, 0.0], dtype=complex), (n, 1))
        assert na.berry_loop_phase(na.ElectronicField(r=r, psi=psi), consts) == 0.0

    def test_gauge_invariance(self, consts):
        f = phase_winding_field()
        theta = 0.4 * np.sin(f.r) + 0.1 * np.cos(2 * f.r)
        shifted = na.ElectronicField(r=f.r, psi=np.exp(1j * theta)[:, None] * f.psi)
        loop0 = na.berry_loop_phase(f, consts)
        loop1 = na.berry_loop_phase(shifted, consts)
        assert abs(loop1 - loop0) <= 1e-9
