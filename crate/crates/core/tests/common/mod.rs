pub mod method_fixture;
pub mod oracles;
