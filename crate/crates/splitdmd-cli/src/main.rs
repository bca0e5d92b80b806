fn main() {
    println!("{}", splitdmd::probe());
}
