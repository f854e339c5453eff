#include <iostream>
#include <numbers>

#include "ifef/io.hpp"
#include "ifef/reference.hpp"

using namespace ifef;

int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : "data/burgers_reference.csv";
    const MatrixXd rows = burgers_reference_grid(0.01 / std::numbers::pi, 101, 1.0, 256);
    std::string text = "t,x,u\n";
    for (Index i = 0; i < rows.rows(); ++i)
        text += format_double(rows(i, 0)) + "," + format_double(rows(i, 1)) + "," + format_double(rows(i, 2)) + "\n";
    write_atomic(out, text);
    std::cout << out << " " << rows.rows() << " rows sha256 " << sha256_hex(text) << "\n";
}
