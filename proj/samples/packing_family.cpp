// Build the constant-condition-number packing family and print its certification report.
#include <grdpg/grdpg.hpp>

#include <cstdio>

using namespace grdpg;

int main(int argc, char** argv) {
    PackingParams pp;
    pp.n = argc > 1 ? std::atoll(argv[1]) : 512;
    pp.p = 2;
    pp.q = 1;
    pp.kappa = 9;
    pp.lambda1 = pp.kappa * std::floor(pp.n / (3 * pp.kappa));

    const PackingFamily fam = build_packing(pp);
    std::printf("%zu members, Hadamard block 2^%d repeated %lld times, %lld leftover rows\n", fam.size(), fam.k0,
                static_cast<long long>(fam.m), static_cast<long long>(fam.r));
    for (const auto& note : fam.notes) std::printf("  %-28s %s\n", note.name.c_str(), note.held ? "holds" : "FAILS");

    VerifyOptions vo;
    vo.pair_samples = 20;
    const CertificationReport rep = verify_family(fam, vo);
    for (const auto& c : rep.checks)
        std::printf("%-26s %s  worst %-12.5g bound %-12.5g %s\n", c.name.c_str(), c.pass ? "ok  " : "FAIL", c.value,
                    c.bound, c.witness.c_str());
    return rep.pass() ? 0 : 1;
}
