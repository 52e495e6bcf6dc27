"""Download (or take) a VGG16 ONNX model, cut it at fc2 and record its checksum."""
import argparse
import os
import sys
from pathlib import Path

import requests
from dotenv import load_dotenv

from afr_match.errors import ModelLoadFailure, ShapeMismatch
from afr_match.utils.model_download import (
    DEFAULT_TAP,
    checksum_path,
    download_model,
    truncate_model,
    write_checksum,
)

load_dotenv()


def main():
    """Fetch the model file, truncate it, checksum it, and show how to use it."""
    parser = argparse.ArgumentParser(description='Prepare the ONNX backbone used by `afr-match extract`')
    parser.add_argument(
        '--url',
        type=str,
        default=os.getenv('AFRNET_MODEL_URL'),
        help='Location of the full .onnx file (default: $AFRNET_MODEL_URL)'
    )
    parser.add_argument(
        '--source',
        type=str,
        default=None,
        help='Local full .onnx file to convert instead of downloading'
    )
    parser.add_argument(
        '--sha256',
        type=str,
        default=os.getenv('AFRNET_MODEL_SHA256'),
        help='Expected SHA-256 of the downloaded file (default: $AFRNET_MODEL_SHA256)'
    )
    parser.add_argument(
        '--tap',
        type=str,
        default=DEFAULT_TAP,
        help=f'Layer or tensor to keep as the output (default: {DEFAULT_TAP})'
    )
    parser.add_argument(
        '--no-truncate',
        action='store_true',
        help='Keep the graph as downloaded (it must already expose fc2)'
    )
    parser.add_argument(
        '--output',
        type=str,
        default='models/vgg16.onnx',
        help='Output file path (default: models/vgg16.onnx)'
    )
    args = parser.parse_args()

    output_path = Path(args.output)
    if output_path.exists():
        print(f"Model already present: {output_path}")
        print(f"SHA-256: {write_checksum(output_path)} -> {checksum_path(output_path)}")
        return 0

    print("=" * 80)
    print("Preparing VGG16 backbone")
    print("=" * 80)

    if args.source:
        full_path = Path(args.source)
        if not full_path.exists():
            print(f"Error: source model not found: {full_path}")
            return 1
    else:
        if not args.url:
            print("Error: no model URL given. Pass --url, --source or set AFRNET_MODEL_URL.")
            print("The model must take one 224x224x3 image (NHWC or NCHW),")
            print("e.g. a Keras VGG16(include_top=True) export converted with tf2onnx.")
            return 1
        full_path = output_path if args.no_truncate else output_path.with_name(output_path.stem + '.full.onnx')
        print(f"Downloading {args.url} -> {full_path}...")
        try:
            download_model(args.url, full_path, expected_sha256=args.sha256)
        except (requests.exceptions.RequestException, ModelLoadFailure) as e:
            print(f"Error: {e}")
            return 1

    embedding_output = None
    if not args.no_truncate:
        print(f"Truncating {full_path} at {args.tap!r}...")
        try:
            embedding_output = truncate_model(full_path, output_path, args.tap)
        except (ModelLoadFailure, ShapeMismatch) as e:
            print(f"Error: {e}")
            return 1
    elif args.source:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_bytes(full_path.read_bytes())

    digest = write_checksum(output_path)

    print("\nSummary:")
    print(f"  Model: {output_path}")
    if embedding_output:
        print(f"  Embedding output: {embedding_output}")
    print(f"  SHA-256: {digest} (saved to {checksum_path(output_path)})")
    print("\nTo use it:")
    print(f"  export AFRNET_MODEL_PATH={output_path.resolve()}")
    print("  afr-match extract --extractor backbone")
    return 0


if __name__ == '__main__':
    sys.exit(main())
