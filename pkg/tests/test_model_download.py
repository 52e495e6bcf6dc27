"""Tests for the backbone model download helper."""
import hashlib
from types import SimpleNamespace
from unittest.mock import MagicMock, patch

import pytest
import requests

from afr_match.errors import ModelLoadFailure, ShapeMismatch
from afr_match.utils.model_download import (
    checksum_path,
    download_model,
    find_tap_tensor,
    sha256_file,
    truncate_model,
    verify_checksum,
    write_checksum,
)

MODEL_URL = 'https://models.example.invalid/vgg16.onnx'
PAYLOAD = [b'onnx-', b'', b'weights']


def _mock_response(chunks=PAYLOAD):
    response = MagicMock()
    response.iter_content.return_value = iter(chunks)
    response.raise_for_status = MagicMock()
    # requests.get is used as a context manager
    response.__enter__.return_value = response
    return response


class TestSha256File:
    """Test sha256_file."""

    def test_matches_hashlib(self, tmp_path):
        """Test the digest equals hashlib over the whole file."""
        path = tmp_path / 'm.onnx'
        path.write_bytes(b'x' * 5000)

        assert sha256_file(path, chunk_size=64) == hashlib.sha256(b'x' * 5000).hexdigest()


class TestDownloadModel:
    """Test download_model."""

    @patch('afr_match.utils.model_download.requests.get')
    def test_download_with_checksum(self, mock_get, tmp_path):
        """Test chunks are joined and a matching checksum is accepted."""
        mock_get.return_value = _mock_response()
        expected = hashlib.sha256(b'onnx-weights').hexdigest()

        path = download_model(MODEL_URL, tmp_path / 'models' / 'vgg16.onnx', expected_sha256=expected.upper())

        assert path.read_bytes() == b'onnx-weights'
        assert not (tmp_path / 'models' / 'vgg16.onnx.part').exists()
        mock_get.assert_called_once_with(MODEL_URL, stream=True, timeout=60.0)

    @patch('afr_match.utils.model_download.requests.get')
    def test_download_without_checksum(self, mock_get, tmp_path, caplog):
        """Test an unverified download still lands and is logged as such."""
        mock_get.return_value = _mock_response()

        path = download_model(MODEL_URL, tmp_path / 'vgg16.onnx')

        assert path.exists()
        assert 'not verified' in caplog.text

    @patch('afr_match.utils.model_download.requests.get')
    def test_checksum_mismatch(self, mock_get, tmp_path):
        """Test a wrong checksum raises ModelLoadFailure and leaves no file."""
        mock_get.return_value = _mock_response()

        with pytest.raises(ModelLoadFailure):
            download_model(MODEL_URL, tmp_path / 'vgg16.onnx', expected_sha256='0' * 64)

        assert list(tmp_path.iterdir()) == []

    @patch('afr_match.utils.model_download.requests.get')
    def test_http_error(self, mock_get, tmp_path):
        """Test HTTP errors propagate as RequestException."""
        response = _mock_response()
        response.raise_for_status.side_effect = requests.exceptions.HTTPError('404 Not Found')
        mock_get.return_value = response

        with pytest.raises(requests.exceptions.RequestException):
            download_model(MODEL_URL, tmp_path / 'vgg16.onnx')

        assert not (tmp_path / 'vgg16.onnx').exists()

    @patch('afr_match.utils.model_download.requests.get')
    def test_connection_error(self, mock_get, tmp_path):
        """Test connection failures propagate as RequestException."""
        mock_get.side_effect = requests.exceptions.ConnectionError('unreachable')

        with pytest.raises(requests.exceptions.RequestException):
            download_model(MODEL_URL, tmp_path / 'vgg16.onnx')


def _graph(nodes, inputs=('input_1',), initializers=()):
    return SimpleNamespace(graph=SimpleNamespace(
        node=[SimpleNamespace(name=name, output=list(outputs)) for name, outputs in nodes],
        input=[SimpleNamespace(name=name) for name in inputs],
        initializer=[SimpleNamespace(name=name) for name in initializers],
    ))


KERAS_VGG16_TAIL = [
    ('vgg16/fc1/MatMul', ['vgg16/fc1/MatMul:0']),
    ('vgg16/fc1/Relu', ['vgg16/fc1/Relu:0']),
    ('vgg16/fc2/MatMul', ['vgg16/fc2/MatMul:0']),
    ('vgg16/fc2/Relu', ['vgg16/fc2/Relu:0']),
    ('vgg16/predictions/MatMul', ['vgg16/predictions/MatMul:0']),
    ('vgg16/predictions/Softmax', ['predictions']),
]


class TestChecksumFile:
    """Test the .sha256 file written next to a model."""

    def test_write_and_verify(self, tmp_path):
        """Test a freshly recorded digest verifies."""
        model = tmp_path / 'vgg16.onnx'
        model.write_bytes(b'weights')

        digest = write_checksum(model)

        assert checksum_path(model).read_text() == f'{digest}  vgg16.onnx\n'
        assert verify_checksum(model) == hashlib.sha256(b'weights').hexdigest()

    def test_no_sidecar(self, tmp_path):
        """Test a model without a .sha256 file is not checked."""
        model = tmp_path / 'vgg16.onnx'
        model.write_bytes(b'weights')

        assert verify_checksum(model) is None

    def test_tampered_model(self, tmp_path):
        """Test a model that changed after its digest was recorded raises ModelLoadFailure."""
        model = tmp_path / 'vgg16.onnx'
        model.write_bytes(b'weights')
        write_checksum(model)
        model.write_bytes(b'other weights')

        with pytest.raises(ModelLoadFailure):
            verify_checksum(model)


class TestFindTapTensor:
    """Test find_tap_tensor."""

    def test_layer_name_takes_last_tensor(self):
        """Test fc2 resolves to the activated output, not the MatMul or the softmax."""
        assert find_tap_tensor(_graph(KERAS_VGG16_TAIL), 'fc2') == 'vgg16/fc2/Relu:0'

    def test_exact_tensor_name(self):
        """Test an exact tensor name is returned as is."""
        assert find_tap_tensor(_graph(KERAS_VGG16_TAIL), 'vgg16/fc2/MatMul:0') == 'vgg16/fc2/MatMul:0'

    def test_no_match(self):
        """Test an unknown layer raises ShapeMismatch."""
        with pytest.raises(ShapeMismatch):
            find_tap_tensor(_graph(KERAS_VGG16_TAIL), 'fc3')


class TestTruncateModel:
    """Test truncate_model with the onnx package mocked."""

    def test_extracts_fc2(self, mocker, tmp_path):
        """Test the graph is cut at fc2 with weights left out of the inputs."""
        mock_onnx = mocker.patch('afr_match.utils.model_download.onnx')
        mock_onnx.load.return_value = _graph(
            KERAS_VGG16_TAIL, inputs=('input_1', 'fc1/kernel'), initializers=('fc1/kernel',)
        )

        tensor = truncate_model(tmp_path / 'full.onnx', tmp_path / 'out' / 'vgg16.onnx')

        assert tensor == 'vgg16/fc2/Relu:0'
        assert (tmp_path / 'out').is_dir()
        mock_onnx.utils.extract_model.assert_called_once_with(
            str(tmp_path / 'full.onnx'), str(tmp_path / 'out' / 'vgg16.onnx'), ['input_1'], ['vgg16/fc2/Relu:0']
        )

    def test_unreadable_source(self, mocker, tmp_path):
        """Test a file onnx cannot parse raises ModelLoadFailure."""
        mock_onnx = mocker.patch('afr_match.utils.model_download.onnx')
        mock_onnx.load.side_effect = OSError('truncated protobuf')

        with pytest.raises(ModelLoadFailure):
            truncate_model(tmp_path / 'full.onnx', tmp_path / 'vgg16.onnx')

    def test_onnx_not_installed(self, mocker, tmp_path):
        """Test truncation without the onnx package raises ModelLoadFailure."""
        mocker.patch('afr_match.utils.model_download.onnx', None)

        with pytest.raises(ModelLoadFailure):
            truncate_model(tmp_path / 'full.onnx', tmp_path / 'vgg16.onnx')
