// The (1,1) pseudo-distance f breaks the triangle inequality on three 2x2 matrices.
#include <grdpg/grdpg.hpp>

#include <cstdio>

using namespace grdpg;

int main() {
    const CounterexampleTriple t = counterexample_triple();
    const PseudoDistance xy = f_pseudo_distance(t.x, t.y), xz = f_pseudo_distance(t.x, t.z),
                         yz = f_pseudo_distance(t.y, t.z);
    auto show = [](const char* name, const PseudoDistance& f) {
        std::printf("%s = %.4f at alpha = (%.4f, %.4f), Gamma = %s\n", name, f.value, f.argmin.alpha1, f.argmin.alpha2,
                    to_string(f.argmin.gamma).c_str());
    };
    show("f(X,Y)", xy);
    show("f(X,Z)", xz);
    show("f(Y,Z)", yz);
    std::printf("f(X,Y) + f(X,Z) = %.4f %s f(Y,Z)\n", xy.value + xz.value, xy.value + xz.value < yz.value ? "<" : ">=");
}
