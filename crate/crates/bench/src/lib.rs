//! Fixtures shared by the benchmarks.

use riesz_tf::{assemble_kernel, build_grid, potential_vz, GridLayout, KernelMatrix, KernelParams, Potential};

/// Graphene kernel on the default solver layout.
pub fn graphene_kernel() -> KernelMatrix {
    let params = KernelParams::new(2, 1.0).expect("valid parameters");
    let grid = build_grid(&params, &GridLayout::solver()).expect("valid layout");
    assemble_kernel(&grid, &params).expect("kernel assembles")
}

pub fn unit_charge(kernel: &KernelMatrix) -> Potential {
    potential_vz(1.0, kernel.params(), kernel.grid()).expect("V_Z on the grid")
}
