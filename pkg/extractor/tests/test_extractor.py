import json
import struct
import subprocess
import sys

import numpy as np
import pytest

from ltrc_extractor.cli import main as cli_main
from ltrc_extractor.extract import ExtractionJob, extract, render_prompt
from ltrc_extractor.model import ByteTokenizer, TinyDecoder

HEADER = struct.Struct("<4sIIIII")


def read_header(path):
    with open(path, "rb") as fh:
        return HEADER.unpack(fh.read(HEADER.size))


def test_prompt_renders_summary_suffix():
    prompt = render_prompt("<image: a red square>", "What color is it?")
    assert prompt.startswith("Question:")
    assert prompt.endswith("in one word: [RET].")
    assert "visual input and sentence" in prompt
    assert "sentence" in render_prompt(None, "hello")
    assert "visual input in one word" in render_prompt("<image>", None)
    with pytest.raises(ValueError):
        render_prompt(None, None)


def test_byte_tokenizer_round_trip():
    tok = ByteTokenizer()
    ids = tok.encode("Summary [RET].")
    assert all(0 <= i < 256 for i in ids)
    assert tok.decode(ids) == "Summary [RET]."


def test_extract_all_tokens_shape(tmp_path):
    out = tmp_path / "t.ltrc"
    job = ExtractionJob(query="hello world", out_path=str(out))
    extract(job)
    magic, version, L, N, d, reserved = read_header(out)
    assert (magic, version, reserved) == (b"LTRC", 1, 0)
    assert L == 4
    assert d == 32
    prompt = render_prompt(None, "hello world")
    assert N == len(ByteTokenizer().encode(prompt))
    payload = out.read_bytes()[HEADER.size:]
    assert len(payload) == L * N * d * 4


def test_last_token_policy(tmp_path):
    out = tmp_path / "t.ltrc"
    extract(ExtractionJob(query="hello", policy="last_token", out_path=str(out)))
    _, _, L, N, d, _ = read_header(out)
    assert (L, N) == (4, 1)


def test_reextraction_bit_identical(tmp_path):
    a, b = tmp_path / "a.ltrc", tmp_path / "b.ltrc"
    extract(ExtractionJob(visual="<img>", query="same", out_path=str(a)))
    extract(ExtractionJob(visual="<img>", query="same", out_path=str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_different_seed_changes_states(tmp_path):
    a, b = tmp_path / "a.ltrc", tmp_path / "b.ltrc"
    extract(ExtractionJob(query="same", out_path=str(a), model_seed=0))
    extract(ExtractionJob(query="same", out_path=str(b), model_seed=1))
    assert a.read_bytes() != b.read_bytes()


def test_manifest_records_job(tmp_path):
    out = tmp_path / "t.ltrc"
    extract(ExtractionJob(query="hi", out_path=str(out), sample_id="s7"))
    manifest = json.loads((tmp_path / "t.ltrc.manifest.json").read_text())
    assert manifest["model"] == "tiny"
    assert manifest["policy"] == "all_tokens"
    assert manifest["sample_id"] == "s7"
    assert manifest["source_layer_count"] == "4"
    assert "[RET]" in manifest["prompt"]


def test_states_are_post_block():
    model = TinyDecoder(layers=3, hidden=16, heads=2, seed=0)
    ids = model.tokenizer.encode("abc")
    states = model.hidden_states(ids)
    assert states.shape == (3, 3, 16)
    # consecutive block outputs differ; embeddings are not included
    assert not np.allclose(states[0].numpy(), states[1].numpy())


def test_cli_writes_trace(tmp_path):
    out = tmp_path / "c.ltrc"
    rc = cli_main(["--query", "cli run", "-o", str(out)])
    assert rc == 0
    assert out.exists()


def test_cli_rejects_empty_prompt(tmp_path):
    rc = cli_main(["-o", str(tmp_path / "x.ltrc")])
    assert rc == 1


# -- criterion 12: cross-component round trip through the primary CLI ---------

def run_primary_inspect(path):
    return subprocess.run(
        [sys.executable, "-m", "topoprune.cli", "inspect", str(path)],
        capture_output=True, text=True)


def test_criterion_12_extractor_round_trip(tmp_path):
    """Primary `inspect` accepts the extractor's output with matching fields."""
    out = tmp_path / "t.ltrc"
    job = ExtractionJob(visual="<image: two dogs>", query="How many dogs?",
                        out_path=str(out))
    extract(job)
    _, _, L, N, d, _ = read_header(out)

    result = run_primary_inspect(out)
    assert result.returncode == 0, result.stderr
    assert f"layers:  {L}" in result.stdout
    assert f"tokens:  {N}" in result.stdout
    assert f"dim:     {d}" in result.stdout
    assert "policy: all_tokens" in result.stdout

    again = tmp_path / "t2.ltrc"
    extract(ExtractionJob(visual="<image: two dogs>", query="How many dogs?",
                          out_path=str(again)))
    assert out.read_bytes() == again.read_bytes()
    print(f"[PASS] criterion 12: extract -> inspect round trip, L={L} N={N} d={d}; "
          "re-extraction bit-identical")
