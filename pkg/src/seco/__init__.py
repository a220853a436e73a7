"""Decoupling co-occurring classes on synthetic feature grids: CAM pseudo
masks, patch tags, a prototype bank, a tag-paired reservoir with an EMA
teacher, tag rectification and two contrastive losses.
"""

__version__ = "0.1.0"
