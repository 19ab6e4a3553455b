"""Simulation toolkit for modulation-order confusion in physical-layer security.

Submodules:

* :mod:`mocsim.constellation` - PSK, QAM and golden-angle alphabets
* :mod:`mocsim.channel` - AWGN, flat fading and seeded random streams
* :mod:`mocsim.srm` - symbol random mapping (low to high order)
* :mod:`mocsim.std_codec` - symbol time diversity (high to low order)
* :mod:`mocsim.mimo_confusion` - series-expansion and constellation-path schemes
* :mod:`mocsim.ris` - reflection design for an RIS-assisted link
* :mod:`mocsim.adversary` - modulation classifiers and FastICA
* :mod:`mocsim.harness` - experiment drivers, CSV output and the CLI
"""

__version__ = "0.1.0"
