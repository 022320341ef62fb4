# main.py
# Same entry point as the `align` console script: python main.py run scenarios/v2_clean.yaml

import sys

from pose_align.cli import main

if __name__ == "__main__":
    sys.exit(main())
