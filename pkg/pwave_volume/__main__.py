import sys

from pwave_volume.main import run

sys.exit(run())
