"""The batch command line, end to end at 1200 bit/s.

Everything below shells through the same entry point the installed
`deepvocoder` script uses: train a model and codebooks on a WAV corpus,
encode an utterance to a DVOC stream, inspect the header, decode it back to
a WAV, and score the result.  Desk-scale settings keep it to a couple of
minutes.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from synthetic import vowel_corpus, write_wav

from deepvocoder.cli import main

out_dir = pathlib.Path(__file__).parent / "output"
corpus = out_dir / "corpus"
ref_dir = out_dir / "ref"
dec_dir = out_dir / "dec"
for d in (corpus, ref_dir, dec_dir):
    d.mkdir(parents=True, exist_ok=True)

for i, x in enumerate(vowel_corpus(25, duration=1.3, seed=50)):
    write_wav(corpus / f"utt{i:02d}.wav", x)
print(f"corpus: 25 WAV files in {corpus}")

model = out_dir / "cli.dvae"
book = out_dir / "cli.dvcb"


def run(*args):
    print("\n$ deepvocoder " + " ".join(args))
    code = main(list(args))
    if code != 0:
        sys.exit(f"command failed with exit code {code}")


run("train-dae", str(corpus), str(model), "--mode", "1200",
    "--arch", "387,64,54,64,387", "--skip-pretrain", "--epochs", "300",
    "--minibatch", "128", "--lr", "5", "--lr-decrement", "0", "--seed", "0")

run("train-codebook", str(corpus), str(model), str(book), "--mode", "1200")

probe = vowel_corpus(1, duration=2.0, seed=777)[0]
write_wav(ref_dir / "probe.wav", probe)
stream = out_dir / "probe.dvoc"
run("encode", str(ref_dir / "probe.wav"), str(stream),
    "--model", str(model), "--codebook", str(book), "--mode", "1200", "-j", "3")

run("info", str(stream))

run("decode", str(stream), str(dec_dir / "probe.wav"),
    "--model", str(model), "--codebook", str(book), "--gl-iters", "60")

run("evaluate", str(ref_dir), str(dec_dir))
