// scratch: debug absorbing q=2 case
use osserman_core::expr::Expr;
use osserman_core::nonlin::{GrowthClass, Limit, Nonlinearity};
use osserman_core::ode::{solve_radial, ProblemSpec};
use osserman_core::ode::bounds::EstimateKit;

fn main() {
    let f = Nonlinearity::auto(Expr::exp(Expr::identity()), Limit::PlusInfinity, Some(GrowthClass::Exponential)).unwrap();
    let g = Nonlinearity::auto(Expr::constant(-1.0), Limit::Finite(-1.0), Some(GrowthClass::Bounded)).unwrap();
    let spec = ProblemSpec::new(f.clone(), g.clone(), 2.0, 1.0, 0.0).unwrap();
    let kit = EstimateKit::new(&f, &g, 2.0, 1.0, 0.0).unwrap();
    let out = solve_radial(&spec).unwrap();
    println!("status: {:?}", out.status);
    let n = out.trajectory.samples.len();
    println!("samples: {n}");
    for idx in [1usize, n/8, n/4, n/2, 3*n/4, n-20, n-10, n-1] {
        let s = &out.trajectory.samples[idx.min(n-1)];
        let psi = kit.psi.value(s.phi);
        let v_exact = (2.0*psi).sqrt();
        // exact psi closed form: (e^t - e^{-2t})/3
        let psi_cf = if s.phi < 700.0 { (s.phi.exp() - (-2.0*s.phi).exp())/3.0 } else { f64::INFINITY };
        println!("r={:.6e} phi={:.6e} dphi={:.6e} v_exact={:.6e} psi={:.6e} psi_cf={:.6e}", s.r, s.phi, s.dphi, v_exact, psi, psi_cf);
    }
}
