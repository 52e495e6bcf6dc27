"""Tests for JSON and byte export helpers."""
import json
import os
import tempfile

import pytest

from afr_match.utils.file_utils import load_json, save_bytes, save_json


class TestSaveJson:
    """Test JSON export functionality."""

    def test_save_json_success(self):
        """Test successful JSON export."""
        data = {'created_at': '1970-01-01T00:00:00+00:00', 'counts': {'Real': 4, 'Easy': 8}}

        with tempfile.TemporaryDirectory() as tmpdir:
            filename = os.path.join(tmpdir, 'ingest.json')
            save_json(data, filename)

            with open(filename, 'r') as f:
                loaded_data = json.load(f)

            assert loaded_data == data

    def test_save_json_creates_parents(self, tmp_path):
        """Test missing parent directories are created."""
        target = tmp_path / 'out' / 'nested' / 'stats.json'

        save_json([], target)

        assert target.exists()

    def test_save_json_is_repeatable(self, tmp_path):
        """Test the same data gives the same bytes, ending in a newline."""
        data = {'b': 1, 'a': [0.5, None]}
        save_json(data, tmp_path / 'one.json')
        save_json(data, tmp_path / 'two.json')

        first = (tmp_path / 'one.json').read_bytes()
        assert first == (tmp_path / 'two.json').read_bytes()
        assert first.endswith(b'\n')
        # Pretty-printed JSON should have newlines inside
        assert first.count(b'\n') > 1


class TestLoadJson:
    """Test JSON loading."""

    def test_round_trip(self, tmp_path):
        """Test data saved with save_json loads back unchanged."""
        data = [{'mode': 'Easy', 'threshold': 0.92}]
        save_json(data, tmp_path / 'report.json')

        assert load_json(tmp_path / 'report.json') == data

    def test_missing_file(self, tmp_path):
        """Test a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_json(tmp_path / 'missing.json')

    def test_invalid_json(self, tmp_path):
        """Test malformed content raises JSONDecodeError."""
        (tmp_path / 'bad.json').write_text('{not json')

        with pytest.raises(json.JSONDecodeError):
            load_json(tmp_path / 'bad.json')


class TestSaveBytes:
    """Test save_bytes."""

    def test_writes_payload(self, tmp_path):
        """Test bytes are written verbatim to a new directory."""
        path = save_bytes(b'series,x,y\n', tmp_path / 'plots' / 'plotdata.csv')

        assert path.read_bytes() == b'series,x,y\n'
