import json

import pytest

from lgcsed.cli import build_parser, main


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_generate_corpus_command(tmp_path, capsys):
    out = tmp_path / "corpus"
    rc = main([
        "generate-corpus", "--out", str(out),
        "--n-strong", "1", "--n-weak", "1", "--n-unlabeled", "1",
        "--n-classes", "2", "--clip-len", "1.0", "--seed", "3",
    ])
    assert rc == 0
    assert (out / "manifest.jsonl").exists()
    assert "wrote 3 clips" in capsys.readouterr().out


def test_train_evaluate_export_roundtrip(tmp_path, capsys):
    cfg_file = tmp_path / "tiny.cfg"
    cfg_file.write_text(
        "n_strong = 3\nn_weak = 2\nn_unlabeled = 2\nn_val = 2\n"
        "clip_len_s = 2.0\n"
        "net.n_mels = 32\n"
        "net.conv_blocks = 4,2,4; 4,2,2; 4,1,2\n"
        "net.rnn_hidden = 4\nnet.projection_dim = 4\n"
        "epochs_phase1 = 1\nepochs_phase2 = 1\neval_every = 1\n"
        "batch_strong = 2\nbatch_weak = 2\nbatch_unlabeled = 2\n"
    )
    out_dir = tmp_path / "run"
    assert main(["train", "--config", str(cfg_file), "--out", str(out_dir)]) == 0
    final = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert set(final) == {"frame_f1", "event_f1"}

    ckpt = out_dir / "last.ckpt.npz"
    assert ckpt.exists()
    assert main(["evaluate", "--checkpoint", str(ckpt)]) == 0
    text = capsys.readouterr().out
    assert "frame macro F1" in text

    emb = tmp_path / "emb.jsonl"
    assert main(["export-embeddings", "--checkpoint", str(ckpt), "--out", str(emb)]) == 0
    capsys.readouterr()
    first = json.loads(emb.read_text().splitlines()[0])
    assert {"frame", "targets", "features", "projection", "teacher_probs"} <= set(first)
