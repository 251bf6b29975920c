#!/usr/bin/env python3
"""Generate the Pascal VOC novel x base Lin-similarity fixtures.

Lin similarity over WordNet 3.0 nouns with information content taken from
the SemCor counts shipped as NLTK's ``wordnet_ic/ic-semcor.dat``.

Requirements: ``pip install nltk`` plus the ``wordnet`` and ``wordnet_ic``
corpora under an NLTK data directory. When the NLTK downloader cannot reach
its server, the same files are bundled in the ``wn==0.0.23`` sdist under
``wn/data/wordnet-3.0`` and ``wn/data/wordnet_ic``; they use CRLF line
endings and must be converted to LF before NLTK can seek by byte offset.

Usage: python3 gen_voc_similarity.py [output_dir]
"""

import sys
from pathlib import Path

from nltk.corpus import wordnet as wn
from nltk.corpus import wordnet_ic

# One synset per VOC class name. Multi-word and abbreviated class names are
# resolved by hand; everything else is the first noun sense.
SYNSETS = {
    "aeroplane": "airplane.n.01",
    "bicycle": "bicycle.n.01",
    "bird": "bird.n.01",
    "boat": "boat.n.01",
    "bottle": "bottle.n.01",
    "bus": "bus.n.01",
    "car": "car.n.01",
    "cat": "cat.n.01",
    "chair": "chair.n.01",
    "cow": "cow.n.01",
    "diningtable": "dining_table.n.01",
    "dog": "dog.n.01",
    "horse": "horse.n.01",
    "motorbike": "motorcycle.n.01",
    "person": "person.n.01",
    "pottedplant": "pot.n.01",
    "sheep": "sheep.n.01",
    "sofa": "sofa.n.01",
    "train": "train.n.01",
    "tvmonitor": "television_receiver.n.01",
}

# TFA's three VOC base/novel splits.
NOVEL = {
    1: ["bird", "bus", "cow", "motorbike", "sofa"],
    2: ["aeroplane", "bottle", "cow", "horse", "sofa"],
    3: ["boat", "cat", "motorbike", "sheep", "sofa"],
}


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    ic = wordnet_ic.ic("ic-semcor.dat")
    synsets = {name: wn.synset(sid) for name, sid in SYNSETS.items()}
    for split, novel in NOVEL.items():
        base = [name for name in SYNSETS if name not in novel]
        lines = ["," + ",".join(base)]
        for n in novel:
            row = [repr(float(synsets[n].lin_similarity(synsets[b], ic))) for b in base]
            lines.append(n + "," + ",".join(row))
        path = out_dir / f"voc_split{split}.csv"
        path.write_text("\n".join(lines) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
