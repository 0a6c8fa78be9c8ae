"""Tests for the benchmark generators, preprocessing and CSV I/O."""

import json

import numpy as np
import pytest

from src.data import (
    Dataset, chunk_dataset, destandardize, export_dataset, gen_kink, gen_kink_step, gen_lorenz,
    ingest_csv, kink_function, kink_step_function, load_exported_dataset, lorenz_matrix, lorenz_transition,
    prepare_dataset, split_train_test, standardize,
)
from src.model import Trajectory
from src.schema import ColumnSchema, DatasetSpec
from src.utils.errors import ContractViolation, EmptyDatasetError, ParseError


def _write(path, text):
    path.write_text(text)
    return path


class TestGenerators:
    """Benchmark transition functions and simulated datasets."""

    def test_kink_function_values(self):
        assert np.isclose(kink_function(0.0), 0.5)
        assert np.isclose(kink_function(-0.2), 0.8)

    @pytest.mark.parametrize("x,expected", [(2.0, 3.0), (3.5, 0.0), (4.5, 5.5), (5.0, 6.0), (6.0, 4.0)])
    def test_kink_step_pieces(self, x, expected):
        assert np.isclose(kink_step_function(x), expected)

    def test_kink_shapes_and_initial_range(self):
        data = gen_kink(num_seq=5, T=12, seed=3)
        assert len(data) == 5
        for seq in data.sequences:
            assert seq.states.shape == (13, 1) and seq.observations.shape == (12, 1)
            assert -3.0 <= seq.states[0, 0] <= 1.0
        assert data.metadata["generator"] == "kink"

    def test_kink_step_initial_range(self):
        data = gen_kink_step(num_seq=8, T=4, seed=1)
        assert all(0.0 <= seq.states[0, 0] <= 6.0 for seq in data.sequences)

    def test_same_seed_same_data(self):
        a, b = gen_kink(3, 10, seed=5), gen_kink(3, 10, seed=5)
        for x, y in zip(a.sequences, b.sequences):
            assert np.array_equal(x.states, y.states)
            assert np.array_equal(x.observations, y.observations)

    def test_different_seed_different_data(self):
        a, b = gen_kink(1, 10, seed=1), gen_kink(1, 10, seed=2)
        assert not np.array_equal(a.sequences[0].observations, b.sequences[0].observations)

    def test_lorenz_first_order_is_euler(self):
        x = np.array([1.0, 2.0, 3.0])
        expected = x + 0.01 * lorenz_matrix(x) @ x
        assert np.allclose(lorenz_transition(x, dt=0.01, order=1), expected)

    def test_lorenz_matches_matrix_exponential_series(self):
        """The Taylor sum equals sum_j (A dt)^j / j! applied to x."""
        x = np.array([-2.0, 0.5, 20.0])
        A = lorenz_matrix(x) * 0.02
        F = np.eye(3)
        term = np.eye(3)
        for j in range(1, 6):
            term = term @ A / j
            F = F + term
        assert np.allclose(lorenz_transition(x, dt=0.02), F @ x)

    def test_lorenz_noise_free_rollout(self):
        data = gen_lorenz(T=5, seed=0, process_var=0.0)
        states = data.sequences[0].states
        assert np.allclose(states[0], 1.0)
        assert np.allclose(states[1], lorenz_transition(states[0]))

    def test_invalid_sizes(self):
        with pytest.raises(ContractViolation):
            gen_kink(0, 10)
        with pytest.raises(ContractViolation):
            gen_lorenz(T=5, dt=0.0)


class TestPreprocessing:
    """Standardisation, held-out tails and chunking."""

    def test_standardize(self, kink_data):
        scaled = standardize(kink_data)
        y = np.concatenate([seq.observations for seq in scaled.sequences])
        assert np.allclose(y.mean(axis=0), 0.0)
        assert np.allclose(y.std(axis=0), 1.0)
        original = destandardize(scaled.sequences[0].observations, scaled.stats)
        assert np.allclose(original, kink_data.sequences[0].observations)

    def test_states_follow_observation_scaling(self, kink_data):
        """With d_x = d_y the states are mapped with the observation statistics."""
        scaled = standardize(kink_data)
        stats = scaled.stats
        expected = (kink_data.sequences[1].states - stats.mean) / stats.std
        assert np.allclose(scaled.sequences[1].states, expected)

    def test_test_split_uses_training_statistics(self, kink_data):
        train, test = split_train_test(kink_data, 3)
        train = standardize(train)
        test = standardize(test, stats=train.stats)
        assert test.stats is train.stats

    def test_constant_channel(self):
        data = Dataset([Trajectory(observations=np.ones((4, 1)))])
        with pytest.raises(ContractViolation):
            standardize(data)

    def test_split(self, kink_data):
        train, test = split_train_test(kink_data, 4)
        seq, tr, te = kink_data.sequences[0], train.sequences[0], test.sequences[0]
        assert tr.length == 6 and te.length == 4
        assert np.array_equal(te.observations, seq.observations[6:])
        assert np.array_equal(te.states, seq.states[6:])
        assert np.array_equal(tr.states[-1], te.states[0])

    def test_split_edges(self, kink_data):
        assert split_train_test(kink_data, 0) == (kink_data, None)
        with pytest.raises(ContractViolation):
            split_train_test(kink_data, 10)

    def test_chunking_drops_tail(self):
        data = Dataset([Trajectory(states=np.zeros((46, 1)), observations=np.arange(45.0))])
        chunks = chunk_dataset(data, 20)
        assert len(chunks) == 2
        assert np.array_equal(chunks.sequences[1].observations[:, 0], np.arange(20.0, 40.0))
        assert chunks.sequences[0].states.shape == (21, 1)

    def test_chunk_longer_than_data(self, kink_data):
        with pytest.raises(EmptyDatasetError):
            chunk_dataset(kink_data, 11)

    def test_empty_dataset(self):
        with pytest.raises(EmptyDatasetError):
            Dataset([])

    def test_groups_by_length(self):
        data = Dataset([
            Trajectory(observations=np.zeros((3, 1))),
            Trajectory(observations=np.zeros((5, 1))),
            Trajectory(observations=np.ones((3, 1))),
        ])
        groups = data.groups()
        assert [g[0].shape for g in groups] == [(2, 3, 1), (1, 5, 1)]
        assert groups[0][2] == [0, 2]

    def test_prepare_lorenz_chunks(self):
        spec = DatasetSpec(generator="lorenz", length=45, test_length=5, chunk_length=20, standardize=True)
        prepared = prepare_dataset(spec)
        assert len(prepared.train) == 2
        assert prepared.history.sequences[0].length == 40
        assert prepared.test.sequences[0].length == 5
        assert prepared.stats is not None


class TestCsvIngest:
    """External series with column roles."""

    def test_observations_and_controls(self, tmp_path):
        path = _write(tmp_path / "s.csv", "t,y,u\n0,1.0,0.5\n1,2.0,0.25\n2,3.0,0\n")
        data = ingest_csv(path, ColumnSchema(observations=["y"], controls=["u"], time="t"))
        seq = data.sequences[0]
        assert np.array_equal(seq.observations[:, 0], [1.0, 2.0, 3.0])
        assert np.array_equal(seq.controls[:, 0], [0.5, 0.25, 0.0])
        assert seq.states is None

    def test_sequence_column(self, tmp_path):
        path = _write(tmp_path / "s.csv", "id,y\nb,1\na,2\nb,3\n")
        data = ingest_csv(path, ColumnSchema(observations=["y"], sequence="id"))
        assert [seq.observations[:, 0].tolist() for seq in data.sequences] == [[1.0, 3.0], [2.0]]

    def test_missing_column(self, tmp_path):
        path = _write(tmp_path / "s.csv", "t,y\n0,1\n")
        with pytest.raises(ParseError) as info:
            ingest_csv(path, ColumnSchema(observations=["z"]))
        assert info.value.line_number == 1

    def test_ragged_row(self, tmp_path):
        path = _write(tmp_path / "s.csv", "t,y\n0,1\n1\n")
        with pytest.raises(ParseError) as info:
            ingest_csv(path, ColumnSchema(observations=["y"]))
        assert info.value.line_number == 3

    def test_non_numeric_cell(self, tmp_path):
        path = _write(tmp_path / "s.csv", "t,y\n0,1\n1,abc\n")
        with pytest.raises(ParseError) as info:
            ingest_csv(path, ColumnSchema(observations=["y"]))
        assert info.value.line_number == 3

    def test_header_only(self, tmp_path):
        path = _write(tmp_path / "s.csv", "t,y\n")
        with pytest.raises(EmptyDatasetError):
            ingest_csv(path, ColumnSchema(observations=["y"]))

    def test_export_then_ingest(self, kink_data, tmp_path):
        """An exported trajectory file reads back as an observed series; the x_0 row is skipped."""
        paths = export_dataset(kink_data, tmp_path)
        data = ingest_csv(paths[0], ColumnSchema(observations=["y_1"]))
        assert np.array_equal(data.sequences[0].observations, kink_data.sequences[0].observations)


class TestExport:
    """Directory export and reload."""

    def test_files_and_sidecar(self, kink_data, tmp_path):
        paths = export_dataset(kink_data, tmp_path)
        assert [p.name for p in paths] == ["kink_000.csv", "kink_001.csv", "kink_002.csv"]
        sidecar = json.loads((tmp_path / "dataset.json").read_text())
        assert sidecar["metadata"]["seed"] == 0
        assert sidecar["num_sequences"] == 3

    def test_reload(self, kink_data, tmp_path):
        export_dataset(standardize(kink_data), tmp_path)
        loaded = load_exported_dataset(tmp_path)
        assert len(loaded) == 3
        assert loaded.stats is not None
        assert np.array_equal(loaded.sequences[2].states, standardize(kink_data).sequences[2].states)

    def test_reload_without_sidecar(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_exported_dataset(tmp_path)
