"""Figure scripts over the benchmark harness's CSV outputs.

These scripts never recompute metrics; they only render what the
harness wrote. Given identical inputs they emit identical files (the
style is pinned and SVG metadata is stripped).
"""

__version__ = "0.1.0"
