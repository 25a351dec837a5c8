"""Ensemble orchestration: determinism, statistics, witness, sweeps."""

import math
from dataclasses import replace

import numpy as np
import pytest

from sqhhg.ensemble import (
    RunConfig,
    averaged_spectrum,
    cutoff_statistics,
    draw_samples,
    resolve_atom,
    run_ensemble,
    sweep,
    two_channel_table,
    witness_ratio,
    write_shots_csv,
    ShotRecord,
)
from sqhhg.exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    UndefinedRatioError,
)
from sqhhg.fieldgen import ModeVolumeSpec, PulseSpec
from sqhhg.quadrature import SqueezeParams
from sqhhg.spectral import CutoffExtraction, CutoffProtocol, Spectrum
from sqhhg.tdse import AtomModel, GridSpec, ground_state

# reduced-scale physics: 800 nm single-cycle pulse on a 1024-point box,
# ~0.3 s per shot, same code paths as production
CHEAP = RunConfig(
    pulse=PulseSpec(wavelength_nm=800.0, n_cycles=1.0),
    grid=GridSpec(x_min=-102.4, x_max=102.4, nx=1024, dt=0.05, absorber_width=12.0),
    atom=AtomModel(softening_a=1.1891, ip_target_ev=15.76, ip_achieved_au=0.579157),
    n_shot=8,
    master_seed=777,
    driver_kind="coherent",
)


@pytest.fixture(scope="module")
def cheap_ground():
    return ground_state(CHEAP.atom, CHEAP.grid)


def fake_record(i, h_ev, flags=frozenset()):
    cut = CutoffExtraction(h_au=h_ev / 27.2114, h_ev=h_ev, h_ho=h_ev / 0.8266,
                           plateau_level_log10=-4.0, flags=flags)
    return ShotRecord(shot_index=i, x=0.0, p=0.0, cutoff=cut, norm_loss=0.0)


class TestDrawSamples:
    def test_driver_kinds_distinct_but_seeded(self):
        sq = draw_samples(replace(CHEAP, driver_kind="squeezed",
                                  squeeze=SqueezeParams(r=1.0)), [0, 1, 2])
        co = draw_samples(CHEAP, [0, 1, 2])
        assert [s.shot_index for s in sq] == [0, 1, 2]
        assert sq[0].x != co[0].x  # different covariance, same substream
        again = draw_samples(replace(CHEAP, driver_kind="squeezed",
                                     squeeze=SqueezeParams(r=1.0)), [0, 1, 2])
        assert [(s.x, s.p) for s in sq] == [(s.x, s.p) for s in again]

    def test_r_zero_squeezed_equals_coherent(self):
        sq = draw_samples(replace(CHEAP, driver_kind="squeezed"), [0, 1, 2, 3])
        co = draw_samples(CHEAP, [0, 1, 2, 3])
        assert [(s.x, s.p) for s in sq] == [(s.x, s.p) for s in co]

    def test_seed_offset_decorrelates(self):
        a = draw_samples(CHEAP, [0, 1])
        b = draw_samples(replace(CHEAP, seed_offset=1_000_000), [0, 1])
        assert (a[0].x, a[0].p) != (b[0].x, b[0].p)

    def test_displacement_matches_mean_field(self):
        s = draw_samples(replace(CHEAP, mode_volume=ModeVolumeSpec("ratio", 1e-6),
                                 n_shot=1), [0])[0]
        assert s.x == pytest.approx(1e6, rel=1e-4)  # X_c = E0/E_vac


class TestRunEnsemble:
    def test_single_shot_repeatable(self, cheap_ground):
        cfg = replace(CHEAP, n_shot=1)
        a = run_ensemble(cfg, ground=cheap_ground)[0]
        b = run_ensemble(cfg, ground=cheap_ground)[0]
        assert a.h_ev == b.h_ev
        assert (a.x, a.p) == (b.x, b.p)

    def test_worker_count_invariance(self, cheap_ground):
        seq = run_ensemble(CHEAP, workers=1, ground=cheap_ground)
        par = run_ensemble(CHEAP, workers=2, ground=cheap_ground)
        assert [r.shot_index for r in seq] == [r.shot_index for r in par]
        assert [r.h_ev for r in seq] == [r.h_ev for r in par]
        assert [(r.x, r.p) for r in seq] == [(r.x, r.p) for r in par]

    def test_coherent_scatter_is_nonzero(self, cheap_ground):
        cfg = replace(CHEAP, n_shot=24)
        records = run_ensemble(cfg, ground=cheap_ground)
        stats = cutoff_statistics(records, seed=1)
        assert stats.n_valid == 24
        assert stats.var_h > 0.0

    def test_vanishing_vacuum_field_limit(self, cheap_ground):
        # E_vac -> 0: every shot collapses onto the mean-field realization
        cfg = replace(CHEAP, n_shot=6, mode_volume=ModeVolumeSpec("ratio", 1e-6))
        records = run_ensemble(cfg, ground=cheap_ground)
        h = [r.h_ev for r in records]
        assert max(h) - min(h) <= 2e-2  # within extraction resolution

    def test_csv_bytes_deterministic(self, cheap_ground, tmp_path):
        records = run_ensemble(CHEAP, ground=cheap_ground)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_shots_csv(records, p1)
        write_shots_csv(run_ensemble(CHEAP, workers=2, ground=cheap_ground), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestCutoffStatistics:
    def test_degenerate_identical_values(self):
        records = [fake_record(i, 100.0) for i in range(20)]
        stats = cutoff_statistics(records, seed=3)
        assert stats.var_h == 0.0
        assert stats.ci95_var == (0.0, 0.0)
        assert stats.mean_h == 100.0

    def test_known_normal_distribution(self):
        rng = np.random.default_rng(5)
        records = [fake_record(i, h) for i, h in enumerate(100 + 2 * rng.standard_normal(1000))]
        stats = cutoff_statistics(records, seed=3)
        assert stats.ci95_var[0] <= 4.0 <= stats.ci95_var[1]
        assert stats.mean_h == pytest.approx(100.0, abs=0.2)

    def test_variance_needs_ten_valid(self):
        records = [fake_record(i, 100.0 + i) for i in range(5)]
        with pytest.raises(InsufficientDataError):
            cutoff_statistics(records, seed=3)
        stats = cutoff_statistics(records, seed=3, require_variance=False)
        assert stats.mean_h == pytest.approx(102.0)
        assert math.isnan(stats.var_h)

    def test_flagged_records_excluded_and_counted(self):
        good = [fake_record(i, 100.0 + 0.1 * i) for i in range(12)]
        bad = [fake_record(99, 500.0, flags=frozenset({"no_drop"})),
               ShotRecord(100, 0.0, 0.0, None, math.nan)]
        stats = cutoff_statistics(good + bad, seed=3)
        assert stats.n_valid == 12
        assert stats.n_flagged == 2
        assert stats.mean_h < 110.0

    def test_bootstrap_seed_reproducible(self):
        rng = np.random.default_rng(6)
        records = [fake_record(i, h) for i, h in enumerate(100 + rng.standard_normal(50))]
        a = cutoff_statistics(records, seed=9)
        b = cutoff_statistics(records, seed=9)
        assert a.ci95_var == b.ci95_var


class TestWitnessRatio:
    def _normal_records(self, seed, sd, n=200, base=0):
        rng = np.random.default_rng(seed)
        return [fake_record(base + i, h) for i, h in enumerate(100 + sd * rng.standard_normal(n))]

    def test_identical_distributions_consistent_with_one(self):
        a = self._normal_records(1, 1.0)
        b = self._normal_records(2, 1.0)
        wit = witness_ratio(a, b, seed=4)
        assert wit.ci95[0] <= 1.0 <= wit.ci95[1]

    def test_known_variance_ratio(self):
        a = self._normal_records(3, 0.5)
        b = self._normal_records(4, 1.0)
        wit = witness_ratio(a, b, seed=4)
        assert wit.ci95[0] <= 0.25 <= wit.ci95[1]
        assert wit.ratio == pytest.approx(0.25, rel=0.4)

    def test_degenerate_reference_rejected(self):
        a = self._normal_records(5, 1.0)
        b = [fake_record(i, 100.0) for i in range(50)]
        with pytest.raises(UndefinedRatioError):
            witness_ratio(a, b, seed=4)

    def test_split_half_sql_consistency(self, cheap_ground):
        cfg = replace(CHEAP, n_shot=48)
        records = run_ensemble(cfg, workers=2, ground=cheap_ground)
        wit = witness_ratio(records[:24], records[24:], seed=4)
        assert wit.ci95[0] <= 1.0 <= wit.ci95[1]


class TestSweep:
    def test_empty_axis(self):
        result = sweep(CHEAP, "r", [])
        assert result.rows == [] and result.sql_stats is None

    def test_single_point_sweep(self, cheap_ground):
        cfg = replace(CHEAP, n_shot=12, driver_kind="squeezed")
        result = sweep(cfg, "r", [0.5], workers=2)
        assert len(result.rows) == 1
        row = result.rows[0]
        assert row.axis_value == 0.5
        assert row.witness is not None
        with pytest.raises(InvalidParameterError):
            two_channel_table(sweep(cfg, "theta", [0.0], workers=2))

    def test_axis_validation(self):
        with pytest.raises(InvalidParameterError):
            sweep(CHEAP, "phi", [0.0])


class TestAveragedSpectrum:
    def test_single_shot_identity(self, cheap_ground):
        cfg = replace(CHEAP, n_shot=1, store_spectra=True)
        records = run_ensemble(cfg, ground=cheap_ground)
        avg = averaged_spectrum(records)
        assert np.array_equal(avg.s, records[0].spectrum.s)

    def test_union_linearity(self):
        omega = np.linspace(0.0, 10.0, 50)
        def rec(i, level):
            spec = Spectrum(omega_au=omega, s=np.full_like(omega, level),
                            omega_carrier_au=1.0)
            r = fake_record(i, 100.0)
            return replace(r, spectrum=spec)
        a = [rec(0, 1.0), rec(1, 3.0)]
        b = [rec(2, 5.0)]
        combined = averaged_spectrum(a + b)
        expected = (2 * averaged_spectrum(a).s + 1 * averaged_spectrum(b).s) / 3
        assert np.allclose(combined.s, expected)

    def test_mismatched_grids_rejected(self):
        r1 = replace(fake_record(0, 100.0), spectrum=Spectrum(
            np.linspace(0, 10, 50), np.ones(50), 1.0))
        r2 = replace(fake_record(1, 100.0), spectrum=Spectrum(
            np.linspace(0, 12, 50), np.ones(50), 1.0))
        with pytest.raises(InvalidParameterError):
            averaged_spectrum([r1, r2])

    def test_no_spectra_rejected(self):
        with pytest.raises(InvalidParameterError):
            averaged_spectrum([fake_record(0, 100.0)])


class TestConfig:
    def test_driver_kind_validated(self):
        with pytest.raises(InvalidParameterError):
            RunConfig(driver_kind="thermal")

    def test_resolve_atom_calibrates_when_missing(self):
        atom = resolve_atom(AtomModel(softening_a=math.nan, ip_target_ev=15.76))
        assert abs(atom.ip_achieved_au * 27.2114 - 15.76) <= 0.05

    def test_effective_squeeze_mean_field_displacement(self):
        cfg = CHEAP
        sq = cfg.effective_squeeze()
        assert sq.alpha_mag == pytest.approx(100.0, rel=1e-9)
        explicit = replace(CHEAP, squeeze=SqueezeParams(alpha_mag=7.0))
        assert explicit.effective_squeeze().alpha_mag == 7.0
