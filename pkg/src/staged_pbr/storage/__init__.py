"""Storage layer - PFM maps, scene bundles and previews."""
