use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::Network;

/// Bus admittance matrix over in-service branches, ordered like `net.buses`.
/// Parallel branches are summed; bus shunts and line charging sit on the diagonal.
pub fn admittance_matrix(net: &Network) -> DMatrix<Complex64> {
    admittance_matrix_excluding(net, &BTreeSet::new())
}

/// Same as [`admittance_matrix`] with the branch ids in `open` treated as out of service.
pub fn admittance_matrix_excluding(net: &Network, open: &BTreeSet<u32>) -> DMatrix<Complex64> {
    let n = net.n_bus();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (i, bus) in net.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.g_shunt, bus.b_shunt) / net.base_mva;
    }
    for br in net.branches.iter().filter(|b| b.in_service && !open.contains(&b.id)) {
        let f = net.index_of(br.from_bus).expect("validated branch");
        let t = net.index_of(br.to_bus).expect("validated branch");
        let series = Complex64::new(br.r, br.x).inv();
        let charging = Complex64::new(0.0, br.b_shunt / 2.0);
        y[(f, f)] += series + charging;
        y[(t, t)] += series + charging;
        y[(f, t)] -= series;
        y[(t, f)] -= series;
    }
    y
}
