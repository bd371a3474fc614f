#!/usr/bin/env python3
"""Fetch the real Swissmetro survey table into data/swissmetro.dat.

The file is distributed by EPFL's Transport and Mobility Laboratory
(https://transp-or.epfl.ch/data/swissmetro.dat) together with its
documentation. This script needs ordinary network access; run it on your own
machine if the repository's sandbox cannot reach the host. Once the file is
in place, the acceptance suite picks it up automatically and the real-data
criteria run against it.
"""

import sys
import urllib.request

URL = "https://transp-or.epfl.ch/data/swissmetro.dat"


def main(path):
    print(f"downloading {URL} ...")
    with urllib.request.urlopen(URL, timeout=60) as resp:
        body = resp.read()
    if not body.startswith(b"GROUP"):
        raise SystemExit("unexpected payload; refusing to write")
    with open(path, "wb") as out:
        out.write(body)
    print(f"wrote {len(body)} bytes to {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/swissmetro.dat")
