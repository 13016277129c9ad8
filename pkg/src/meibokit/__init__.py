"""meibokit: meibography gland-mask morphometry, clinical reports, datasets, evaluation."""

__version__ = "0.1.0"
