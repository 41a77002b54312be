use lame_dtn::dtn::DtnExpansion;
use lame_dtn::geometry::{CollarData, Polynomial};

fn main() -> Result<(), lame_dtn::error::DtnError> {
    let lam = Polynomial::constant(1.0, 2);
    let mu = Polynomial::constant(1.0, 2);
    let collar = CollarData::euclidean(2, 5, vec![1.0], &lam, &mu)?;
    let exp = DtnExpansion::compute(&collar, 3)?;
    println!("{}", exp.p.terms[0].value());
    Ok(())
}
