import json

import numpy as np
import pytest

from pmvc.cli import EXIT_CODES, build_parser, main
from pmvc.config import CONFIG_SCHEMA
from pmvc.serialize import load_mel
from pmvc.synth import generate_corpus

MICRO_SET = [
    "--set", "mel.sample_rate=8000",
    "--set", "mel.fft_size=512",
    "--set", "mel.win_length=512",
    "--set", "mel.hop_length=128",
    "--set", "mel.n_mels=48",
    "--set", "policy.target_frames=32",
    "--set", "model.content_dim=8",
    "--set", "model.prosody_dim=8",
    "--set", "model.encoder_channels=16",
    "--set", "model.predictor_hidden=8",
    "--set", "model.predictor_recurrent_layers=1",
    "--set", "model.decoder_channels=16",
    "--set", "model.speaker_dim=16",
    "--set", "speaker.embedding_dim=16",
    "--set", "speaker.hidden=16",
    "--set", "speaker.recurrent_layers=1",
    "--set", "speaker.steps=20",
    "--set", "speaker.utterances_per_speaker=3",
    "--set", "speaker.crop_frames=24",
    "--set", "train.batch_size=4",
    "--set", "train.total_steps=8",
    "--set", "train.log_interval=4",
    "--set", "train.checkpoint_interval=1000",
    "--set", "train.embed_utterances=3",
    "--set", "eval.griffin_lim_iterations=3",
    "--set", "eval.probe_utterances=6",
    "--set", "eval.conversion_speakers=2",
]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the full CLI pipeline once at micro scale and share artifacts."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    generate_corpus(
        corpus, n_speakers=4, utterances_per_speaker=4,
        sample_rate=8000, seed=5, syllable_duration=0.12,
    )
    run = root / "run"
    data = run / "data"
    manifest = data / "manifest.json"
    speaker_ckpt = run / "speaker.ckpt"

    common = ["--run-dir", str(run), *MICRO_SET]
    assert main(["prepare", "--corpus", str(corpus), "--out", str(data), *common]) == 0
    assert main(["pretrain-speaker", "--manifest", str(manifest), "--out", str(speaker_ckpt), *common]) == 0
    assert main(["train", "--manifest", str(manifest), "--speaker-ckpt", str(speaker_ckpt), *common]) == 0
    return {
        "root": root,
        "run": run,
        "corpus": corpus,
        "manifest": manifest,
        "speaker_ckpt": speaker_ckpt,
        "model_ckpt": run / "final.ckpt",
        "common": common,
    }


class TestPipelineArtifacts:
    def test_prepare_wrote_manifest_and_mels(self, pipeline):
        assert pipeline["manifest"].exists()
        doc = json.loads(pipeline["manifest"].read_text())
        assert len(doc["entries"]) == 16
        assert doc["train_speakers"] and doc["test_speakers"]

    def test_train_wrote_checkpoint_and_log(self, pipeline):
        assert pipeline["model_ckpt"].exists()
        log = (pipeline["run"] / "loss_log.txt").read_text()
        assert "step=1 " in log and "recon=" in log and "total=" in log


class TestAugmentCommand:
    def test_repeat_is_bitwise_identical(self, pipeline, tmp_path):
        wav = next((pipeline["corpus"] / "speaker_00").glob("*.wav"))
        out1, out2 = tmp_path / "a.mel", tmp_path / "b.mel"
        args = ["--t", "2", "--rate-low", "0.7", "--rate-high", "1.5", *pipeline["common"]]
        assert main(["augment", "--in", str(wav), "--out", str(out1), *args]) == 0
        assert main(["augment", "--in", str(wav), "--out", str(out2), *args]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_length_preserved_and_wav_written(self, pipeline, tmp_path):
        wav = next((pipeline["corpus"] / "speaker_01").glob("*.wav"))
        out = tmp_path / "aug.mel"
        out_wav = tmp_path / "aug.wav"
        assert main(
            ["augment", "--in", str(wav), "--out", str(out), "--wav", str(out_wav), *pipeline["common"]]
        ) == 0
        assert out_wav.exists()
        aug = load_mel(out)
        # compare against a fresh analysis of the same input
        src = tmp_path / "src.mel"
        assert main(
            ["augment", "--in", str(wav), "--out", str(src), "--rate-low", "1.0", "--rate-high", "1.0",
             *pipeline["common"]]
        ) == 0
        assert aug.n_frames == load_mel(src).n_frames

    def test_mel_input_accepted(self, pipeline, tmp_path):
        mel = next((pipeline["run"] / "data" / "mels" / "speaker_00").glob("*.mel"))
        out = tmp_path / "from_mel.mel"
        assert main(["augment", "--in", str(mel), "--out", str(out), *pipeline["common"]]) == 0
        assert out.exists()


class TestConvertCommand:
    def test_outputs_mel_and_wav(self, pipeline, tmp_path):
        src = next((pipeline["corpus"] / "speaker_00").glob("*.wav"))
        out = tmp_path / "conv"
        assert main(
            [
                "convert", "--source", str(src), "--target-dir", str(pipeline["corpus"] / "speaker_01"),
                "--ckpt", str(pipeline["model_ckpt"]), "--speaker-ckpt", str(pipeline["speaker_ckpt"]),
                "--out", str(out), *pipeline["common"],
            ]
        ) == 0
        spec = load_mel(out.with_suffix(".mel"))
        assert spec.frames.shape[1] == 48
        assert np.all(np.isfinite(spec.frames))
        assert out.with_suffix(".wav").exists()

    def test_missing_speaker_checkpoint_exits_one(self, pipeline, tmp_path, capsys):
        src = next((pipeline["corpus"] / "speaker_00").glob("*.wav"))
        code = main(
            [
                "convert", "--source", str(src), "--target-dir", str(pipeline["corpus"] / "speaker_01"),
                "--ckpt", str(pipeline["model_ckpt"]), "--speaker-ckpt", str(tmp_path / "absent.ckpt"),
                "--out", str(tmp_path / "x"), *pipeline["common"],
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "error[VALIDATION]" in err and "missing prerequisite checkpoint" in err


class TestEvaluateProbeExport:
    def test_evaluate_report(self, pipeline, tmp_path):
        out = tmp_path / "eval.json"
        assert main(
            [
                "evaluate", "--ckpt", str(pipeline["model_ckpt"]),
                "--speaker-ckpt", str(pipeline["speaker_ckpt"]),
                "--manifest", str(pipeline["manifest"]), "--out", str(out), *pipeline["common"],
            ]
        ) == 0
        doc = json.loads(out.read_text())
        assert doc["total_pairs"] == 2  # 2 speakers -> 2 ordered pairs
        assert 0 <= doc["target_preferred"] <= doc["total_pairs"]

    @pytest.mark.parametrize("condition", ["with_adv", "without_adv"])
    def test_probe_report(self, pipeline, tmp_path, condition):
        out = tmp_path / f"probe_{condition}.json"
        assert main(
            [
                "probe", "--ckpt", str(pipeline["model_ckpt"]), "--manifest", str(pipeline["manifest"]),
                "--condition", condition, "--out", str(out), *pipeline["common"],
            ]
        ) == 0
        doc = json.loads(out.read_text())
        assert doc["condition"] == condition
        assert len(doc["seen"]["errors"]) == 3 and len(doc["unseen"]["errors"]) == 3

    def test_export_latents(self, pipeline, tmp_path):
        out = tmp_path / "latents.csv"
        assert main(
            [
                "export-latents", "--ckpt", str(pipeline["model_ckpt"]),
                "--manifest", str(pipeline["manifest"]), "--speakers", "speaker_00",
                "--out", str(out), *pipeline["common"],
            ]
        ) == 0
        assert len(out.read_text().strip().splitlines()) == 4


class TestSweepCommand:
    def test_sweep_writes_results(self, pipeline, tmp_path):
        run = tmp_path / "sweep_run"
        assert main(
            [
                "sweep", "--manifest", str(pipeline["manifest"]),
                "--speaker-ckpt", str(pipeline["speaker_ckpt"]),
                "--run-dir", str(run), *MICRO_SET, "--set", "train.total_steps=4",
            ]
        ) == 0
        rows = json.loads((run / "sweep_results.json").read_text())
        assert len(rows) == 5
        assert {(r["content_dim"], r["prosody_dim"]) for r in rows} == {
            (128, 128), (96, 160), (64, 192), (160, 96), (192, 64)
        }
        assert all(r["status"] == "ok" for r in rows)


class TestErrorsAndHelp:
    def test_unknown_verb_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_config_key_exits_one(self, capsys):
        code = main(["prepare", "--corpus", "x", "--set", "nope=1"])
        assert code == 1
        assert "error[CONFIG]" in capsys.readouterr().err

    def test_wrong_checkpoint_magic_exits_two(self, pipeline, tmp_path, capsys):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"GARBAGE!" + b"\x00" * 32)
        code = main(
            [
                "probe", "--ckpt", str(bad), "--manifest", str(pipeline["manifest"]),
                *pipeline["common"],
            ]
        )
        assert code == 2
        assert "error[STATE]" in capsys.readouterr().err

    def test_help_lists_every_config_key(self):
        parser = build_parser()
        text = parser.format_help()
        for key in CONFIG_SCHEMA:
            assert key in text

    def test_exit_code_table_covers_all_errors(self):
        from pmvc import errors

        assert set(EXIT_CODES) == {
            errors.ValidationError, errors.ConfigurationError,
            errors.StateError, errors.TrainingError, errors.AudioIOError,
        }
