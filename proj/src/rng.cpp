#include "physmg/rng.hpp"

#include "physmg/special.hpp"

namespace physmg::rng {

double Stream::next_normal() {
    return special::norm_ppf(next_open());
}

}  // namespace physmg::rng
