use covhf::avar::{w_squared_endo, AvarInputs};
use covhf::weightfn::WeightScheme;

fn main() {
    for qp in [1024usize, 2048, 4096, 20480] {
        let scheme = WeightScheme::triangular_with_resolution(qp);
        let c = scheme.kernel_constants().unwrap();
        println!(
            "qp={qp}: kappa={:.17e} kappa_tilde={:.17e} kappa_bar={:.17e} psi_hy={:.17e}",
            c.kappa, c.kappa_tilde, c.kappa_bar, c.psi_hy
        );
    }
    let scheme = WeightScheme::triangular();
    let k = scheme.kernel_constants().unwrap();
    // Endogenous acceptance scenario: rho=0.5, sigma=1, omega=0.005,
    // phi=0.3, Poisson p1=p2=1, theta=0.8.
    let (phi, rho, omega): (f64, f64, f64) = (0.3, 0.5, 0.005);
    let inputs = AvarInputs {
        ic_x: 1.0,
        ic_y: 1.0,
        ic_xy: rho,
        psi11: omega * omega,
        psi22: omega * omega,
        psi12: 0.0,
        chi: 0.0,
        z_x: phi * phi,
        z_y: phi * phi,
        z_xy: phi * phi * rho,
        zx_y: phi * rho,
        x_zy: phi * rho,
        g: 1.5,
        f1: 1.0,
        f2: 1.0,
        f12: 1.0,
        theta: 0.8,
        constants: k,
    };
    println!("w2_endo_golden={:.17e}", w_squared_endo(&inputs).unwrap());
}
