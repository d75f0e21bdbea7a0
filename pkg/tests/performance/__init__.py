"""Performance benchmarks for hypocert."""
