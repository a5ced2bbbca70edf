//! Tensor Lipschitz distance (in progress).
