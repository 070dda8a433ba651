"""Hard smooth PL instances and first-order lower-bound certification."""
