"""Channel polarization laboratory: polar transforms, the Bhattacharyya
process in double-log form, refined scaling experiments, kernels and
erasure-channel polar codes."""

__version__ = "0.1.0"
