import json

import numpy as np
import pytest
from scipy.io import wavfile

from deepvocoder.cli import main, read_wav
from deepvocoder.dae import load_model
from deepvocoder.errors import FormatError
from deepvocoder.vq import SplitCodebook, load_codebook, save_codebook

from _synth import vowel_corpus


def write_wav(path, samples, rate=8000):
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), rate, pcm)


@pytest.fixture(scope="module")
def corpus_2400(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus24")
    for i, x in enumerate(vowel_corpus(20, duration=0.5, seed=0)):
        write_wav(root / f"utt{i:02d}.wav", x)
    return root


@pytest.fixture(scope="module")
def corpus_1200(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus12")
    for i, x in enumerate(vowel_corpus(25, duration=1.3, seed=50)):
        write_wav(root / f"utt{i:02d}.wav", x)
    return root


@pytest.fixture(scope="module")
def model_2400(corpus_2400, tmp_path_factory):
    path = tmp_path_factory.mktemp("model24") / "tiny.dvae"
    code = main([
        "train-dae", str(corpus_2400), str(path), "--mode", "2400",
        "--arch", "258,16,72,16,258", "--epochs", "5", "--minibatch", "128",
        "--lr", "0.2", "--lr-decrement", "0", "--skip-pretrain", "--seed", "1",
    ])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def model_1200(corpus_1200, tmp_path_factory):
    path = tmp_path_factory.mktemp("model12") / "tiny.dvae"
    code = main([
        "train-dae", str(corpus_1200), str(path), "--mode", "1200",
        "--arch", "387,16,54,16,387", "--epochs", "3", "--minibatch", "128",
        "--lr", "0.2", "--lr-decrement", "0", "--skip-pretrain", "--seed", "2",
    ])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def codebook_2400(tmp_path_factory):
    # random codewords are enough to exercise the stream plumbing
    rng = np.random.default_rng(9)
    cb = SplitCodebook([rng.random((4096, 12)) for _ in range(6)], (12,) * 6)
    path = tmp_path_factory.mktemp("cb24") / "book.dvcb"
    save_codebook(cb, path)
    return path


class TestWavIngestion:
    def test_reads_valid_file(self, tmp_path):
        path = tmp_path / "ok.wav"
        write_wav(path, np.linspace(-0.5, 0.5, 800))
        x = read_wav(path)
        assert x.shape == (800,) and np.max(np.abs(x)) <= 1.0

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        pcm = np.zeros((100, 2), dtype=np.int16)
        wavfile.write(str(path), 8000, pcm)
        with pytest.raises(FormatError, match="channels"):
            read_wav(path)

    def test_wrong_rate_rejected(self, tmp_path):
        path = tmp_path / "fast.wav"
        wavfile.write(str(path), 16000, np.zeros(100, dtype=np.int16))
        with pytest.raises(FormatError, match="8000"):
            read_wav(path)

    def test_wrong_depth_rejected(self, tmp_path):
        path = tmp_path / "float.wav"
        wavfile.write(str(path), 8000, np.zeros(100, dtype=np.float32))
        with pytest.raises(FormatError, match="16-bit"):
            read_wav(path)


class TestTrainDae:
    def test_writes_model_and_loss_falls(self, corpus_2400, tmp_path, capsys):
        out = tmp_path / "m.dvae"
        code = main([
            "train-dae", str(corpus_2400), str(out), "--mode", "2400",
            "--arch", "258,16,72,16,258", "--epochs", "5", "--minibatch", "128",
            "--lr", "0.2", "--lr-decrement", "0", "--skip-pretrain", "--seed", "3",
        ])
        assert code == 0
        assert out.exists()
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("epoch")]
        assert len(lines) == 5
        losses = [float(l.split()[-1]) for l in lines]
        assert losses[-1] < losses[0]
        model = load_model(out)
        assert model.layer_dims == [258, 16, 72, 16, 258]

    def test_empty_directory_errors(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["train-dae", str(empty), str(tmp_path / "m.dvae")])
        assert code == 2
        assert str(empty) in capsys.readouterr().err

    def test_same_seed_byte_identical(self, corpus_2400, tmp_path):
        args = ["train-dae", str(corpus_2400), "", "--mode", "2400",
                "--arch", "258,16,72,16,258", "--epochs", "2", "--minibatch", "128",
                "--seed", "7", "--skip-pretrain"]
        out1, out2 = tmp_path / "a.dvae", tmp_path / "b.dvae"
        args[2] = str(out1)
        assert main(args) == 0
        args[2] = str(out2)
        assert main(args) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_bad_architecture_rejected(self, corpus_2400, tmp_path, capsys):
        code = main([
            "train-dae", str(corpus_2400), str(tmp_path / "m.dvae"),
            "--arch", "100,16,72,16,100", "--epochs", "1", "--skip-pretrain",
        ])
        assert code == 2
        assert "architecture" in capsys.readouterr().err


class TestTrainCodebook:
    def test_1200_mode_codebook_shapes(self, corpus_1200, model_1200, tmp_path, capsys):
        out = tmp_path / "book.dvcb"
        code = main(["train-codebook", str(corpus_1200), str(model_1200), str(out),
                     "--mode", "1200"])
        assert code == 0
        cb = load_codebook(out)
        assert cb.D == 6
        assert all(split.shape == (512, 9) for split in cb.splits)

    def test_insufficient_latents_errors(self, model_1200, tmp_path, capsys):
        small = tmp_path / "small"
        small.mkdir()
        for i, x in enumerate(vowel_corpus(2, duration=0.6, seed=77)):
            write_wav(small / f"u{i}.wav", x)
        code = main(["train-codebook", str(small), str(model_1200),
                     str(tmp_path / "b.dvcb"), "--mode", "1200"])
        assert code == 2
        assert "at least" in capsys.readouterr().err

    def test_model_mode_mismatch_errors(self, corpus_2400, model_1200, tmp_path, capsys):
        code = main(["train-codebook", str(corpus_2400), str(model_1200),
                     str(tmp_path / "b.dvcb"), "--mode", "2400"])
        assert code == 2


class TestEncodeDecode:
    def test_ten_second_payload_size(self, model_2400, codebook_2400, tmp_path):
        wav = tmp_path / "ten.wav"
        write_wav(wav, 0.2 * np.sin(2 * np.pi * 300 * np.arange(80000) / 8000))
        out = tmp_path / "ten.dvoc"
        code = main(["encode", str(wav), str(out), "--model", str(model_2400),
                     "--codebook", str(codebook_2400), "--mode", "2400", "-j", "1"])
        assert code == 0
        blob = out.read_bytes()
        assert len(blob) - 30 == 2997  # fixed header + 333 * 9 payload bytes

    def test_round_trip_sample_count(self, model_2400, codebook_2400, tmp_path):
        n = 9876
        wav = tmp_path / "in.wav"
        write_wav(wav, vowel_corpus(1, duration=n / 8000.0, seed=5)[0][:n])
        dvoc = tmp_path / "x.dvoc"
        out = tmp_path / "out.wav"
        assert main(["encode", str(wav), str(dvoc), "--model", str(model_2400),
                     "--codebook", str(codebook_2400), "-j", "2"]) == 0
        assert main(["decode", str(dvoc), str(out), "--model", str(model_2400),
                     "--codebook", str(codebook_2400), "--gl-iters", "5"]) == 0
        rate, pcm = wavfile.read(str(out))
        assert rate == 8000 and pcm.dtype == np.int16
        assert pcm.shape == (n,)

    def test_stereo_input_rejected(self, model_2400, codebook_2400, tmp_path, capsys):
        wav = tmp_path / "st.wav"
        wavfile.write(str(wav), 8000, np.zeros((1000, 2), dtype=np.int16))
        code = main(["encode", str(wav), str(tmp_path / "x.dvoc"),
                     "--model", str(model_2400), "--codebook", str(codebook_2400)])
        assert code == 2
        assert "channels" in capsys.readouterr().err

    def test_hash_mismatch_warns_on_decode(self, model_2400, codebook_2400, tmp_path, capsys):
        wav = tmp_path / "in.wav"
        write_wav(wav, vowel_corpus(1, duration=0.5, seed=6)[0])
        dvoc = tmp_path / "x.dvoc"
        assert main(["encode", str(wav), str(dvoc), "--model", str(model_2400),
                     "--codebook", str(codebook_2400), "-j", "1"]) == 0
        other_cb = tmp_path / "other.dvcb"
        rng = np.random.default_rng(123)
        save_codebook(SplitCodebook([rng.random((4096, 12)) for _ in range(6)],
                                    (12,) * 6), other_cb)
        out = tmp_path / "out.wav"
        code = main(["decode", str(dvoc), str(out), "--model", str(model_2400),
                     "--codebook", str(other_cb), "--gl-iters", "1"])
        assert code == 0
        assert "hash" in capsys.readouterr().err
        assert out.exists()

    def test_decode_garbage_container_errors(self, model_2400, codebook_2400, tmp_path, capsys):
        bad = tmp_path / "bad.dvoc"
        bad.write_bytes(b"not a container at all, padded past the header size....")
        code = main(["decode", str(bad), str(tmp_path / "o.wav"),
                     "--model", str(model_2400), "--codebook", str(codebook_2400)])
        assert code == 2
        assert "magic" in capsys.readouterr().err


class TestEvaluate:
    def test_identical_dirs(self, tmp_path, capsys):
        ref = tmp_path / "ref"
        test = tmp_path / "test"
        ref.mkdir(), test.mkdir()
        for i, x in enumerate(vowel_corpus(3, duration=1.2, seed=20)):
            write_wav(ref / f"u{i}.wav", x)
            write_wav(test / f"u{i}.wav", x)
        assert main(["evaluate", str(ref), str(test)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "utterance,lsd_db,fwsegsnr_db,stoi"
        for line in out[1:4]:
            name, lsd, snr, st = line.split(",")
            assert float(lsd) == 0.0
            assert float(snr) == pytest.approx(35.0)
            assert float(st) >= 0.99
        assert out[4].startswith("mean±std,")

    def test_unpaired_file_errors(self, tmp_path, capsys):
        ref = tmp_path / "ref"
        test = tmp_path / "test"
        ref.mkdir(), test.mkdir()
        x = vowel_corpus(1, duration=1.0, seed=30)[0]
        write_wav(ref / "a.wav", x)
        write_wav(ref / "b.wav", x)
        write_wav(test / "a.wav", x)
        assert main(["evaluate", str(ref), str(test)]) == 2
        assert "b.wav" in capsys.readouterr().err

    def test_csv_output_file(self, tmp_path):
        ref = tmp_path / "ref"
        test = tmp_path / "test"
        ref.mkdir(), test.mkdir()
        x = vowel_corpus(1, duration=1.2, seed=40)[0]
        write_wav(ref / "a.wav", x)
        write_wav(test / "a.wav", x)
        out_csv = tmp_path / "report.csv"
        assert main(["evaluate", str(ref), str(test), "--output", str(out_csv)]) == 0
        assert out_csv.read_text().startswith("utterance,")


class TestInfo:
    def test_header_dump(self, model_2400, codebook_2400, tmp_path, capsys):
        wav = tmp_path / "in.wav"
        write_wav(wav, vowel_corpus(1, duration=1.0, seed=60)[0])
        dvoc = tmp_path / "x.dvoc"
        assert main(["encode", str(wav), str(dvoc), "--model", str(model_2400),
                     "--codebook", str(codebook_2400), "-j", "1"]) == 0
        capsys.readouterr()
        assert main(["info", str(dvoc)]) == 0
        out = capsys.readouterr().out
        assert "2400 bit/s, T=2, 36 bits/frame" in out
        assert "super-frames: 33" in out
        assert "duration: 1.000 s" in out


class TestUsageAndConfig:
    def test_no_command_is_usage_error(self):
        assert main([]) == 1

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_config_file_defaults_and_flag_priority(self, corpus_2400, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "arch": [258, 16, 72, 16, 258], "epochs": 4, "skip_pretrain": True,
            "minibatch": 128, "lr": 0.1, "lr_decrement": 0,
        }))
        out = tmp_path / "m.dvae"
        code = main(["train-dae", str(corpus_2400), str(out),
                     "--config", str(cfg), "--epochs", "2"])
        assert code == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("epoch")]
        assert len(lines) == 2  # flag beat the config file

    def test_missing_config_errors(self, corpus_2400, tmp_path):
        assert main(["train-dae", str(corpus_2400), str(tmp_path / "m.dvae"),
                     "--config", str(tmp_path / "nope.json")]) == 2
