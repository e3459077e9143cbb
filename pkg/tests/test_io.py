import numpy as np
import pytest

from kerrchaos.evolve import TimeSeries
from kerrchaos.io import (
    FileFormatError,
    read_series,
    read_series_csv,
    write_series,
    write_series_csv,
)


@pytest.fixture
def sample_series():
    rng = np.random.default_rng(5)
    return TimeSeries(
        dt=0.1,
        values=rng.standard_normal(1000) * np.pi,
        label="mean_N",
        params_hash=bytes(range(32)),
    )


class TestBinaryFormat:
    def test_round_trip_bit_identical(self, tmp_path, sample_series):
        path = tmp_path / "series.ts"
        write_series(path, sample_series)
        back = read_series(path)
        assert back.dt == sample_series.dt
        assert back.label == sample_series.label
        assert back.params_hash == sample_series.params_hash
        assert np.array_equal(back.values, sample_series.values)
        assert back.values.tobytes() == sample_series.values.tobytes()

    def test_rewrite_is_stable(self, tmp_path, sample_series):
        a = tmp_path / "a.ts"
        b = tmp_path / "b.ts"
        write_series(a, sample_series)
        write_series(b, read_series(a))
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.ts"
        path.write_bytes(b"not a series file at all" * 4)
        with pytest.raises(FileFormatError):
            read_series(path)

    def test_rejects_truncation(self, tmp_path, sample_series):
        path = tmp_path / "series.ts"
        write_series(path, sample_series)
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(FileFormatError):
            read_series(path)

    def test_unicode_label(self, tmp_path):
        ts = TimeSeries(dt=1.0, values=np.arange(4.0), label="⟨N⟩ côté")
        path = tmp_path / "u.ts"
        write_series(path, ts)
        assert read_series(path).label == "⟨N⟩ côté"


class TestCsvExport:
    def test_lossless_round_trip(self, tmp_path, sample_series):
        path = tmp_path / "series.csv"
        write_series_csv(path, sample_series)
        back = read_series_csv(path)
        assert back.dt == sample_series.dt
        assert np.array_equal(back.values, sample_series.values)
        assert back.params_hash == sample_series.params_hash

    def test_extreme_values_survive(self, tmp_path):
        values = np.array([1e-300, 1e300, np.pi, -1.0 / 3.0, 5e-324 * 2e10])
        ts = TimeSeries(dt=1e-7, values=values)
        path = tmp_path / "x.csv"
        write_series_csv(path, ts)
        assert np.array_equal(read_series_csv(path).values, values)
