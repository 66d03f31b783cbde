#include "pcrtbp/flow.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pcrtbp/errors.hpp"

namespace pcrtbp {

namespace {

// Dormand-Prince 8(5,3), Hairer & Wanner's DOP853 tableau.
constexpr double c2 = 0.526001519587677318785587544488E-01, c3 = 0.789002279381515978178381316732E-01,
                 c4 = 0.118350341907227396726757197510E+00, c5 = 0.281649658092772603273242802490E+00,
                 c6 = 0.333333333333333333333333333333E+00, c7 = 0.25E+00,
                 c8 = 0.307692307692307692307692307692E+00, c9 = 0.651282051282051282051282051282E+00,
                 c10 = 0.6E+00, c11 = 0.857142857142857142857142857142E+00, c14 = 0.1E+00, c15 = 0.2E+00,
                 c16 = 0.777777777777777777777777777778E+00;

constexpr double b1 = 5.42937341165687622380535766363E-2, b6 = 4.45031289275240888144113950566E0,
                 b7 = 1.89151789931450038304281599044E0, b8 = -5.8012039600105847814672114227E0,
                 b9 = 3.1116436695781989440891606237E-1, b10 = -1.52160949662516078556178806805E-1,
                 b11 = 2.01365400804030348374776537501E-1, b12 = 4.47106157277725905176885569043E-2;

constexpr double bhh1 = 0.244094488188976377952755905512E+00, bhh2 = 0.733846688281611857341361741547E+00,
                 bhh3 = 0.220588235294117647058823529412E-01;

constexpr double er1 = 0.1312004499419488073250102996E-01, er6 = -0.1225156446376204440720569753E+01,
                 er7 = -0.4957589496572501915214079952E+00, er8 = 0.1664377182454986536961530415E+01,
                 er9 = -0.3503288487499736816886487290E+00, er10 = 0.3341791187130174790297318841E+00,
                 er11 = 0.8192320648511571246570742613E-01, er12 = -0.2235530786388629525884427845E-01;

constexpr double a21 = 5.26001519587677318785587544488E-2, a31 = 1.97250569845378994544595329183E-2,
                 a32 = 5.91751709536136983633785987549E-2, a41 = 2.95875854768068491816892993775E-2,
                 a43 = 8.87627564304205475450678981324E-2, a51 = 2.41365134159266685502369798665E-1,
                 a53 = -8.84549479328286085344864962717E-1, a54 = 9.24834003261792003115737966543E-1,
                 a61 = 3.7037037037037037037037037037E-2, a64 = 1.70828608729473871279604482173E-1,
                 a65 = 1.25467687566822425016691814123E-1, a71 = 3.7109375E-2,
                 a74 = 1.70252211019544039314978060272E-1, a75 = 6.02165389804559606850219397283E-2,
                 a76 = -1.7578125E-2, a81 = 3.70920001185047927108779319836E-2,
                 a84 = 1.70383925712239993810214054705E-1, a85 = 1.07262030446373284651809199168E-1,
                 a86 = -1.53194377486244017527936158236E-2, a87 = 8.27378916381402288758473766002E-3,
                 a91 = 6.24110958716075717114429577812E-1, a94 = -3.36089262944694129406857109825E0,
                 a95 = -8.68219346841726006818189891453E-1, a96 = 2.75920996994467083049415600797E1,
                 a97 = 2.01540675504778934086186788979E1, a98 = -4.34898841810699588477366255144E1,
                 a101 = 4.77662536438264365890433908527E-1, a104 = -2.48811461997166764192642586468E0,
                 a105 = -5.90290826836842996371446475743E-1, a106 = 2.12300514481811942347288949897E1,
                 a107 = 1.52792336328824235832596922938E1, a108 = -3.32882109689848629194453265587E1,
                 a109 = -2.03312017085086261358222928593E-2, a111 = -9.3714243008598732571704021658E-1,
                 a114 = 5.18637242884406370830023853209E0, a115 = 1.09143734899672957818500254654E0,
                 a116 = -8.14978701074692612513997267357E0, a117 = -1.85200656599969598641566180701E1,
                 a118 = 2.27394870993505042818970056734E1, a119 = 2.49360555267965238987089396762E0,
                 a1110 = -3.0467644718982195003823669022E0, a121 = 2.27331014751653820792359768449E0,
                 a124 = -1.05344954667372501984066689879E1, a125 = -2.00087205822486249909675718444E0,
                 a126 = -1.79589318631187989172765950534E1, a127 = 2.79488845294199600508499808837E1,
                 a128 = -2.85899827713502369474065508674E0, a129 = -8.87285693353062954433549289258E0,
                 a1210 = 1.23605671757943030647266201528E1, a1211 = 6.43392746015763530355970484046E-1;

constexpr double a141 = 5.61675022830479523392909219681E-2, a147 = 2.53500210216624811088794765333E-1,
                 a148 = -2.46239037470802489917441475441E-1, a149 = -1.24191423263816360469010140626E-1,
                 a1410 = 1.5329179827876569731206322685E-1, a1411 = 8.20105229563468988491666602057E-3,
                 a1412 = 7.56789766054569976138603589584E-3, a1413 = -8.298E-3,
                 a151 = 3.18346481635021405060768473261E-2, a156 = 2.83009096723667755288322961402E-2,
                 a157 = 5.35419883074385676223797384372E-2, a158 = -5.49237485713909884646569340306E-2,
                 a1511 = -1.08347328697249322858509316994E-4, a1512 = 3.82571090835658412954920192323E-4,
                 a1513 = -3.40465008687404560802977114492E-4, a1514 = 1.41312443674632500278074618366E-1,
                 a161 = -4.28896301583791923408573538692E-1, a166 = -4.69762141536116384314449447206E0,
                 a167 = 7.68342119606259904184240953878E0, a168 = 4.06898981839711007970213554331E0,
                 a169 = 3.56727187455281109270669543021E-1, a1613 = -1.39902416515901462129418009734E-3,
                 a1614 = 2.9475147891527723389556272149E0, a1615 = -9.15095847217987001081870187138E0;

constexpr double d41 = -0.84289382761090128651353491142E+01, d46 = 0.56671495351937776962531783590E+00,
                 d47 = -0.30689499459498916912797304727E+01, d48 = 0.23846676565120698287728149680E+01,
                 d49 = 0.21170345824450282767155149946E+01, d410 = -0.87139158377797299206789907490E+00,
                 d411 = 0.22404374302607882758541771650E+01, d412 = 0.63157877876946881815570249290E+00,
                 d413 = -0.88990336451333310820698117400E-01, d414 = 0.18148505520854727256656404962E+02,
                 d415 = -0.91946323924783554000451984436E+01, d416 = -0.44360363875948939664310572000E+01,
                 d51 = 0.10427508642579134603413151009E+02, d56 = 0.24228349177525818288430175319E+03,
                 d57 = 0.16520045171727028198505394887E+03, d58 = -0.37454675472269020279518312152E+03,
                 d59 = -0.22113666853125306036270938578E+02, d510 = 0.77334326684722638389603898808E+01,
                 d511 = -0.30674084731089398182061213626E+02, d512 = -0.93321305264302278729567221706E+01,
                 d513 = 0.15697238121770843886131091075E+02, d514 = -0.31139403219565177677282850411E+02,
                 d515 = -0.93529243588444783865713862664E+01, d516 = 0.35816841486394083752465898540E+02,
                 d61 = 0.19985053242002433820987653617E+02, d66 = -0.38703730874935176555105901742E+03,
                 d67 = -0.18917813819516756882830838328E+03, d68 = 0.52780815920542364900561016686E+03,
                 d69 = -0.11573902539959630126141871134E+02, d610 = 0.68812326946963000169666922661E+01,
                 d611 = -0.10006050966910838403183860980E+01, d612 = 0.77771377980534432092869265740E+00,
                 d613 = -0.27782057523535084065932004339E+01, d614 = -0.60196695231264120758267380846E+02,
                 d615 = 0.84320405506677161018159903784E+02, d616 = 0.11992291136182789328035130030E+02,
                 d71 = -0.25693933462703749003312586129E+02, d76 = -0.15418974869023643374053993627E+03,
                 d77 = -0.23152937917604549567536039109E+03, d78 = 0.35763911791061412378285349910E+03,
                 d79 = 0.93405324183624310003907691704E+02, d710 = -0.37458323136451633156875139351E+02,
                 d711 = 0.10409964950896230045147246184E+03, d712 = 0.29840293426660503123344363579E+02,
                 d713 = -0.43533456590011143754432175058E+02, d714 = 0.96324553959188282948394950600E+02,
                 d715 = -0.39177261675615439165231486172E+02, d716 = -0.14972683625798562581422125276E+03;

constexpr double uround = 2.3e-16;

}  // namespace

void validate(const IntegratorConfig& c) {
  if (!(c.rel_tol > 0 && c.abs_tol > 0 && c.event_tol > 0)) throw ConfigError("integrator tolerances must be > 0");
  if (!(c.max_step > 0)) throw ConfigError("integrator max_step must be > 0");
}

Dop853::Dop853(int n, Rhs f, double rel_tol, double abs_tol) : n_(n), f_(std::move(f)), rtol_(rel_tol), atol_(abs_tol) {
  for (auto* v : {&y_, &yold_, &ynew_, &tmp_, &k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &k8_, &k9_, &k10_, &knew_})
    v->assign(n_, 0.0);
  for (auto& r : rc_) r.assign(n_, 0.0);
}

bool Dop853::eval(double t, const double* y, double* dy) {
  ++nfev_;
  try {
    f_(t, y, dy);
  } catch (const SingularChartError&) {
    return false;
  } catch (const DomainError&) {
    return false;
  }
  for (int i = 0; i < n_; ++i)
    if (!std::isfinite(dy[i])) return false;
  return true;
}

void Dop853::reset(double t0, const double* y0) {
  t_ = told_ = t0;
  std::copy(y0, y0 + n_, y_.begin());
  yold_ = y_;
  have_h_ = false;
  dense_ready_ = false;
  reject_ = false;
  facold_ = 1e-4;
  naccept_ = nreject_ = nfev_ = 0;
  if (!eval(t_, y_.data(), k1_.data())) throw SingularChartError("integrator: field undefined at the initial state");
}

double Dop853::initial_step(double hmax, double dir) {
  double dnf = 0, dny = 0;
  for (int i = 0; i < n_; ++i) {
    const double sk = atol_ + rtol_ * std::abs(y_[i]);
    dnf += (k1_[i] / sk) * (k1_[i] / sk);
    dny += (y_[i] / sk) * (y_[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, hmax) * dir;
  for (int i = 0; i < n_; ++i) tmp_[i] = y_[i] + h * k1_[i];
  if (!eval(t_ + h, tmp_.data(), k2_.data())) return 1e-6 * dir;
  double der2 = 0;
  for (int i = 0; i < n_; ++i) {
    const double q = (k2_[i] - k1_[i]) / (atol_ + rtol_ * std::abs(y_[i]));
    der2 += q * q;
  }
  der2 = std::sqrt(der2) / std::abs(h);
  const double der12 = std::max(der2, std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3) : std::pow(0.01 / der12, 0.125);
  return std::min({100.0 * std::abs(h), h1, hmax}) * dir;
}

// Stages 2..12 plus the 8th-order update into ynew_; k4_ holds the b-weighted increment.
void Dop853::stages(double h) {
  const double* y = y_.data();
  auto lin = [&](auto&& expr) {
    for (int i = 0; i < n_; ++i) tmp_[i] = y[i] + h * expr(i);
  };
  bool ok = true;
  lin([&](int i) { return a21 * k1_[i]; });
  ok &= eval(t_ + c2 * h, tmp_.data(), k2_.data());
  lin([&](int i) { return a31 * k1_[i] + a32 * k2_[i]; });
  ok &= ok && eval(t_ + c3 * h, tmp_.data(), k3_.data());
  lin([&](int i) { return a41 * k1_[i] + a43 * k3_[i]; });
  ok &= ok && eval(t_ + c4 * h, tmp_.data(), k4_.data());
  lin([&](int i) { return a51 * k1_[i] + a53 * k3_[i] + a54 * k4_[i]; });
  ok &= ok && eval(t_ + c5 * h, tmp_.data(), k5_.data());
  lin([&](int i) { return a61 * k1_[i] + a64 * k4_[i] + a65 * k5_[i]; });
  ok &= ok && eval(t_ + c6 * h, tmp_.data(), k6_.data());
  lin([&](int i) { return a71 * k1_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]; });
  ok &= ok && eval(t_ + c7 * h, tmp_.data(), k7_.data());
  lin([&](int i) { return a81 * k1_[i] + a84 * k4_[i] + a85 * k5_[i] + a86 * k6_[i] + a87 * k7_[i]; });
  ok &= ok && eval(t_ + c8 * h, tmp_.data(), k8_.data());
  lin([&](int i) {
    return a91 * k1_[i] + a94 * k4_[i] + a95 * k5_[i] + a96 * k6_[i] + a97 * k7_[i] + a98 * k8_[i];
  });
  ok &= ok && eval(t_ + c9 * h, tmp_.data(), k9_.data());
  lin([&](int i) {
    return a101 * k1_[i] + a104 * k4_[i] + a105 * k5_[i] + a106 * k6_[i] + a107 * k7_[i] + a108 * k8_[i] +
           a109 * k9_[i];
  });
  ok &= ok && eval(t_ + c10 * h, tmp_.data(), k10_.data());
  // stage 11 -> k2_, stage 12 -> k3_ (k2, k3 are no longer needed)
  lin([&](int i) {
    return a111 * k1_[i] + a114 * k4_[i] + a115 * k5_[i] + a116 * k6_[i] + a117 * k7_[i] + a118 * k8_[i] +
           a119 * k9_[i] + a1110 * k10_[i];
  });
  ok &= ok && eval(t_ + c11 * h, tmp_.data(), k2_.data());
  lin([&](int i) {
    return a121 * k1_[i] + a124 * k4_[i] + a125 * k5_[i] + a126 * k6_[i] + a127 * k7_[i] + a128 * k8_[i] +
           a129 * k9_[i] + a1210 * k10_[i] + a1211 * k2_[i];
  });
  ok &= ok && eval(t_ + h, tmp_.data(), k3_.data());
  if (!ok) {
    std::fill(ynew_.begin(), ynew_.end(), std::numeric_limits<double>::quiet_NaN());
    return;
  }
  for (int i = 0; i < n_; ++i) {
    k4_[i] = b1 * k1_[i] + b6 * k6_[i] + b7 * k7_[i] + b8 * k8_[i] + b9 * k9_[i] + b10 * k10_[i] + b11 * k2_[i] +
             b12 * k3_[i];
    ynew_[i] = y[i] + h * k4_[i];
  }
}

double Dop853::error_norm(double h) const {
  double err = 0, err2 = 0;
  for (int i = 0; i < n_; ++i) {
    const double sk = 1.0 / (atol_ + rtol_ * std::max(std::abs(y_[i]), std::abs(ynew_[i])));
    double q = (k4_[i] - bhh1 * k1_[i] - bhh2 * k9_[i] - bhh3 * k3_[i]) * sk;
    err2 += q * q;
    q = (er1 * k1_[i] + er6 * k6_[i] + er7 * k7_[i] + er8 * k8_[i] + er9 * k9_[i] + er10 * k10_[i] +
         er11 * k2_[i] + er12 * k3_[i]) *
        sk;
    err += q * q;
  }
  const double deno = err + 0.01 * err2;
  return std::abs(h) * err * std::sqrt(1.0 / (deno <= 0.0 ? n_ : deno * n_));
}

bool Dop853::step(double t_end, double max_step) {
  const double dir = t_end >= t_ ? 1.0 : -1.0;
  const double hmax = std::min(max_step, std::abs(t_end - t_));
  if (hmax <= 0) return true;
  if (!have_h_) {
    h_ = initial_step(hmax, dir);
    have_h_ = true;
  }
  double h = dir * std::min(std::abs(h_), hmax);
  for (;;) {
    if (0.1 * std::abs(h) <= std::abs(t_) * uround || std::abs(h) < 1e-300) return false;
    bool last = false;
    if ((t_ + 1.01 * h - t_end) * dir > 0.0) {
      h = t_end - t_;
      last = true;
    }
    stages(h);
    bool finite = true;
    for (int i = 0; i < n_; ++i) finite &= std::isfinite(ynew_[i]);
    double err = finite ? error_norm(h) : std::numeric_limits<double>::infinity();
    if (finite && !std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    if (!finite || !std::isfinite(err)) {
      h *= 0.25;
      reject_ = true;
      ++nreject_;
      continue;
    }
    const double fac11 = std::pow(err, 0.125);
    const double fac = std::max(1.0 / 6.0, std::min(3.0, fac11 / 0.9));
    double hnew = h / fac;
    if (err <= 1.0) {
      if (!eval(t_ + h, ynew_.data(), knew_.data())) {
        h *= 0.25;
        reject_ = true;
        ++nreject_;
        continue;
      }
      facold_ = std::max(err, 1e-4);
      ++naccept_;
      yold_ = y_;
      told_ = t_;
      std::swap(y_, ynew_);
      t_ = last ? t_end : t_ + h;
      dense_ready_ = false;
      // FSAL: k1_ becomes f(t_new); knew_ keeps f(t_old) for the dense formulae.
      std::swap(k1_, knew_);
      if (std::abs(hnew) > std::abs(max_step)) hnew = dir * max_step;
      if (reject_) hnew = dir * std::min(std::abs(hnew), std::abs(h));
      reject_ = false;
      h_ = hnew;
      last_h_ = h;
      return true;
    }
    hnew = h / std::min(3.0, fac11 / 0.9);
    reject_ = true;
    ++nreject_;
    h = hnew;
  }
}

}  // namespace pcrtbp

namespace pcrtbp {

void Dop853::prepare_dense() {
  if (dense_ready_) return;
  const double h = last_h_;
  const double* y0 = yold_.data();
  const std::vector<double>& k1o = knew_;  // f(t_old)
  const std::vector<double>& k13 = k1_;    // f(t_new)
  auto& K11 = k2_;
  auto& K12 = k3_;
  auto& K14 = k4_;
  auto& K15 = k5_;
  auto& K16 = ynew_;
  for (int i = 0; i < n_; ++i) {
    const double ydiff = y_[i] - y0[i];
    const double bspl = h * k1o[i] - ydiff;
    rc_[0][i] = y0[i];
    rc_[1][i] = ydiff;
    rc_[2][i] = bspl;
    rc_[3][i] = ydiff - h * k13[i] - bspl;
    rc_[4][i] = d41 * k1o[i] + d46 * k6_[i] + d47 * k7_[i] + d48 * k8_[i] + d49 * k9_[i] + d410 * k10_[i] +
                d411 * K11[i] + d412 * K12[i];
    rc_[5][i] = d51 * k1o[i] + d56 * k6_[i] + d57 * k7_[i] + d58 * k8_[i] + d59 * k9_[i] + d510 * k10_[i] +
                d511 * K11[i] + d512 * K12[i];
    rc_[6][i] = d61 * k1o[i] + d66 * k6_[i] + d67 * k7_[i] + d68 * k8_[i] + d69 * k9_[i] + d610 * k10_[i] +
                d611 * K11[i] + d612 * K12[i];
    rc_[7][i] = d71 * k1o[i] + d76 * k6_[i] + d77 * k7_[i] + d78 * k8_[i] + d79 * k9_[i] + d710 * k10_[i] +
                d711 * K11[i] + d712 * K12[i];
  }
  bool ok = true;
  for (int i = 0; i < n_; ++i)
    tmp_[i] = y0[i] + h * (a141 * k1o[i] + a147 * k7_[i] + a148 * k8_[i] + a149 * k9_[i] + a1410 * k10_[i] +
                           a1411 * K11[i] + a1412 * K12[i] + a1413 * k13[i]);
  ok = ok && eval(told_ + c14 * h, tmp_.data(), K14.data());
  if (ok) {
    for (int i = 0; i < n_; ++i)
      tmp_[i] = y0[i] + h * (a151 * k1o[i] + a156 * k6_[i] + a157 * k7_[i] + a158 * k8_[i] + a1511 * K11[i] +
                             a1512 * K12[i] + a1513 * k13[i] + a1514 * K14[i]);
    ok = eval(told_ + c15 * h, tmp_.data(), K15.data());
  }
  if (ok) {
    for (int i = 0; i < n_; ++i)
      tmp_[i] = y0[i] + h * (a161 * k1o[i] + a166 * k6_[i] + a167 * k7_[i] + a168 * k8_[i] + a169 * k9_[i] +
                             a1613 * k13[i] + a1614 * K14[i] + a1615 * K15[i]);
    ok = eval(told_ + c16 * h, tmp_.data(), K16.data());
  }
  for (int i = 0; i < n_; ++i) {
    if (ok) {
      rc_[4][i] = h * (rc_[4][i] + d413 * k13[i] + d414 * K14[i] + d415 * K15[i] + d416 * K16[i]);
      rc_[5][i] = h * (rc_[5][i] + d513 * k13[i] + d514 * K14[i] + d515 * K15[i] + d516 * K16[i]);
      rc_[6][i] = h * (rc_[6][i] + d613 * k13[i] + d614 * K14[i] + d615 * K15[i] + d616 * K16[i]);
      rc_[7][i] = h * (rc_[7][i] + d713 * k13[i] + d714 * K14[i] + d715 * K15[i] + d716 * K16[i]);
    } else {
      // extra stages undefined (chart edge): fall back to the quartic Hermite part
      rc_[4][i] = rc_[5][i] = rc_[6][i] = rc_[7][i] = 0.0;
    }
  }
  dense_ready_ = true;
}

void Dop853::dense(double t, double* out) const {
  const double s = last_h_ == 0.0 ? 0.0 : (t - told_) / last_h_;
  const double s1 = 1.0 - s;
  for (int i = 0; i < n_; ++i) {
    const double conpar = rc_[4][i] + s * (rc_[5][i] + s1 * (rc_[6][i] + s * rc_[7][i]));
    out[i] = rc_[0][i] + s * (rc_[1][i] + s1 * (rc_[2][i] + s * (rc_[3][i] + s1 * conpar)));
  }
}

const char* status_name(FlowStatus s) {
  switch (s) {
    case FlowStatus::Completed: return "completed";
    case FlowStatus::TerminalEvent: return "terminal_event";
    case FlowStatus::Collision: return "collision";
    case FlowStatus::StepUnderflow: return "step_underflow";
    case FlowStatus::MaxTime: return "max_time";
    case FlowStatus::MaxSteps: return "max_steps";
    case FlowStatus::DomainExit: return "domain_exit";
  }
  return "?";
}

ChartState Trajectory::state_at(std::size_t i) const {
  ChartState c{field_chart(field), {}};
  const int d = field_dim(field);
  for (int k = 0; k < d; ++k) c.x[k] = states.at(i)[k];
  return c;
}

double Trajectory::physical_time(std::size_t i) const {
  if (!field_uses_tau(field)) return times.at(i);
  return states.at(i)[field_dim(field)];
}

double Trajectory::max_abs_drift() const {
  double m = 0;
  for (double d : drift) m = std::max(m, std::abs(d));
  return m;
}

namespace {

bool has_chart(FieldId id) {
  return id != FieldId::CollisionTorus && id != FieldId::StraightenedMinus && id != FieldId::StraightenedPlus;
}

// Conserved quantity monitored along each field (NaN: none).
double monitored_integral(FieldId id, const double* y, double mu, double h) {
  Vec4 x{};
  for (int k = 0; k < field_dim(id); ++k) x[k] = y[k];
  try {
    switch (id) {
      case FieldId::Cartesian: return hamiltonian(Cartesian{x[0], x[1], x[2], x[3]}, mu);
      case FieldId::PolarCM: return hamiltonian(Polar{Center::CM, x[0], x[1], x[2], x[3]}, mu);
      case FieldId::PolarP1: return hamiltonian(Polar{Center::P1, x[0], x[1], x[2], x[3]}, mu);
      case FieldId::Infinity: return hamiltonian(InfinityState{x[0], x[1], x[2], x[3]}, mu);
      case FieldId::Regularized: return M_tilde(CollisionState{x[0], x[1], x[2], x[3]}, mu, h);
      default: return std::numeric_limits<double>::quiet_NaN();
    }
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double safe_g(const EventSpec& e, double t, const double* y) {
  try {
    return e.g(t, y);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct Candidate {
  std::size_t event;
  double time;
  int direction;
  bool grazing;
};

}  // namespace

Trajectory integrate(FieldId id, const ChartState& state0, double t0, double t1, double mu, double h,
                     const IntegratorConfig& cfg, const std::vector<EventSpec>& events,
                     const std::vector<double>& output_times, std::vector<std::vector<double>>* sampled) {
  validate(cfg);
  check_mu(mu);
  if (has_chart(id) && state0.chart != field_chart(id))
    throw DomainError(fmt::format("integrate: state is in chart {} but field {} needs {}", chart_name(state0.chart),
                                  field_name(id), chart_name(field_chart(id))));
  const int dim = field_dim(id);
  const bool tau = field_uses_tau(id);
  const int n = dim + (tau ? 1 : 0);
  const bool polar = id == FieldId::PolarCM || id == FieldId::PolarP1;
  const bool near_collision = id == FieldId::Reduced || id == FieldId::Regularized;

  Rhs rhs = [&](double, const double* y, double* dy) {
    Vec4 x{};
    for (int k = 0; k < dim; ++k) x[k] = y[k];
    const Vec4 f = eval_field(id, x, mu, h);
    for (int k = 0; k < dim; ++k) dy[k] = f[k];
    if (tau) dy[dim] = time_factor(id, x);
  };

  Trajectory tr;
  tr.field = id;
  tr.mu = mu;
  tr.h = h;
  std::vector<double> y0(n, 0.0);
  for (int k = 0; k < dim; ++k) y0[k] = state0.x[k];

  const double I0 = monitored_integral(id, y0.data(), mu, h);
  auto drift_of = [&](const double* y) {
    if (std::isnan(I0)) return 0.0;
    const double I = monitored_integral(id, y, mu, h);
    return std::isnan(I) ? std::numeric_limits<double>::quiet_NaN() : I - I0;
  };
  auto radius_of = [&](const double* y) { return id == FieldId::Reduced ? y[0] : std::sqrt(std::max(0.0, y[0])); };
  auto push = [&](double t, const double* y) {
    tr.times.push_back(t);
    tr.states.emplace_back(y, y + n);
    tr.drift.push_back(drift_of(y));
  };

  push(t0, y0.data());
  if (near_collision) tr.s_min = radius_of(y0.data());

  const double dir = t1 >= t0 ? 1.0 : -1.0;
  std::vector<double> outs = output_times;
  std::sort(outs.begin(), outs.end(), [dir](double a, double b) { return dir * a < dir * b; });
  std::size_t next_out = 0;
  if (sampled) sampled->assign(outs.size(), std::vector<double>());
  // Output requests at or before t0 are filled with the initial state.
  while (next_out < outs.size() && dir * (outs[next_out] - t0) <= 0.0) {
    if (sampled) (*sampled)[next_out] = y0;
    ++next_out;
  }

  if (t0 == t1) return tr;

  Dop853 solver(n, rhs, cfg.rel_tol, cfg.abs_tol);
  try {
    solver.reset(t0, y0.data());
  } catch (const SingularChartError& e) {
    tr.status = FlowStatus::DomainExit;
    tr.diagnostic = e.what();
    return tr;
  }

  std::vector<double> gprev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) gprev[e] = safe_g(events[e], t0, y0.data());
  std::vector<int> hits(events.size(), 0);
  std::vector<double> buf(n), buf2(n);

  auto g_at = [&](std::size_t e, double t) {
    solver.dense(t, buf.data());
    return safe_g(events[e], t, buf.data());
  };

  // Root of g_e on [ta, tb] given opposite signs: bisection to 1e-13 then one secant/Newton polish.
  auto locate = [&](std::size_t e, double ta, double tb, double ga) {
    const double scale = std::max(1.0, std::abs(tb));
    for (int it = 0; it < 200 && std::abs(tb - ta) > 1e-13 * scale; ++it) {
      const double tm = 0.5 * (ta + tb);
      const double gm = g_at(e, tm);
      if (std::isnan(gm)) break;
      if ((gm < 0) == (ga < 0) && gm != 0.0) {
        ta = tm;
        ga = gm;
      } else {
        tb = tm;
      }
    }
    double tr_ = 0.5 * (ta + tb);
    const double dt = std::max(1e-7 * std::abs(solver.t() - solver.t_old()), 1e-12 * scale);
    const double gp = g_at(e, tr_ + dt), gm = g_at(e, tr_ - dt), g0 = g_at(e, tr_);
    const double slope = (gp - gm) / (2 * dt);
    if (std::isfinite(slope) && slope != 0.0) {
      const double tn = tr_ - g0 / slope;
      const double lo = std::min(ta, tb) - 1e-13 * scale, hi = std::max(ta, tb) + 1e-13 * scale;
      if (tn >= lo && tn <= hi && std::abs(g_at(e, tn)) <= std::abs(g0)) tr_ = tn;
    }
    return std::pair<double, double>(tr_, slope);
  };

  const double tstart = t0;
  bool stop = false;
  while (!stop) {
    if (std::abs(solver.t() - tstart) >= cfg.max_time) {
      tr.status = FlowStatus::MaxTime;
      break;
    }
    if (tr.steps >= cfg.max_steps) {
      tr.status = FlowStatus::MaxSteps;
      break;
    }
    const double tlim = std::isfinite(cfg.max_time) ? tstart + dir * std::min(cfg.max_time, std::abs(t1 - tstart)) : t1;
    if (!solver.step(tlim, cfg.max_step)) {
      tr.status = FlowStatus::StepUnderflow;
      tr.diagnostic = fmt::format("step size underflow at t = {:.17g}", solver.t());
      break;
    }
    ++tr.steps;
    const double ta = solver.t_old(), tb = solver.t();
    const double hstep = tb - ta;
    double tend = tb;
    std::vector<double> yend = solver.y();
    bool dense_done = false;
    auto ensure_dense = [&] {
      if (!dense_done) {
        solver.prepare_dense();
        dense_done = true;
      }
    };

    // Events.
    std::vector<Candidate> cands;
    std::vector<double> gnew(events.size());
    for (std::size_t e = 0; e < events.size(); ++e) {
      gnew[e] = safe_g(events[e], tb, solver.y().data());
      const double g0 = gprev[e], g1 = gnew[e];
      if (std::isnan(g0) || std::isnan(g1)) continue;
      const bool change = (g0 < 0 && g1 >= 0) || (g0 > 0 && g1 <= 0);
      if (change) {
        ensure_dense();
        auto [t, slope] = locate(e, ta, tb, g0);
        const int d = g1 > g0 ? 1 : -1;
        const bool graze = !(std::abs(slope) * std::abs(hstep) > 1e-7 * std::max(std::abs(g0), std::abs(g1)));
        cands.push_back({e, t, d, graze});
      } else if (g0 != 0.0 && std::min(std::abs(g0), std::abs(g1)) < std::abs(g1 - g0)) {
        // Possible double crossing inside the step: sample the interpolant.
        ensure_dense();
        constexpr int m = 8;
        double tp = ta, gp = g0;
        std::vector<double> roots;
        for (int j = 1; j <= m; ++j) {
          const double tj = ta + hstep * j / m;
          const double gj = j == m ? g1 : g_at(e, tj);
          if (std::isnan(gj)) break;
          if ((gp < 0 && gj >= 0) || (gp > 0 && gj <= 0)) {
            auto [t, slope] = locate(e, tp, tj, gp);
            (void)slope;
            roots.push_back(t);
            cands.push_back({e, t, gj > gp ? 1 : -1, false});
          }
          tp = tj;
          gp = gj;
        }
        if (roots.size() >= 2 && std::abs(roots[1] - roots[0]) < 1e-4 * std::abs(hstep)) {
          cands[cands.size() - 1].grazing = true;
          cands[cands.size() - 2].grazing = true;
        }
      }
    }
    std::sort(cands.begin(), cands.end(),
              [dir](const Candidate& a, const Candidate& b) { return dir * a.time < dir * b.time; });
    for (const Candidate& c : cands) {
      const EventSpec& ev = events[c.event];
      if (ev.direction != 0 && ev.direction != c.direction) continue;
      solver.dense(c.time, buf2.data());
      tr.events.push_back({ev.id, c.time, buf2, c.direction, c.grazing});
      if (c.grazing) continue;
      ++hits[c.event];
      if (ev.terminal && hits[c.event] >= std::max(1, ev.max_hits)) {
        tend = c.time;
        yend = buf2;
        tr.status = FlowStatus::TerminalEvent;
        stop = true;
        break;
      }
    }

    // Dense outputs up to tend.
    while (next_out < outs.size() && dir * (outs[next_out] - tend) <= 0.0) {
      ensure_dense();
      if (sampled) {
        (*sampled)[next_out].resize(n);
        solver.dense(outs[next_out], (*sampled)[next_out].data());
      }
      ++next_out;
    }

    if (cfg.record_steps || stop) push(tend, yend.data());
    gprev = gnew;

    // Domain guards.
    if (!stop) {
      const double* y = yend.data();
      if (polar && y[0] < 1e-6) {
        tr.status = FlowStatus::DomainExit;
        tr.diagnostic = fmt::format("polar radius {:.3e} below 1e-6", y[0]);
        stop = true;
      } else if (near_collision) {
        const double s = radius_of(y);
        tr.s_min = std::min(tr.s_min, s);
        if (s < collision_floor) {
          tr.status = FlowStatus::Collision;
          tr.diagnostic = fmt::format("captured at s = {:.3e}", s);
          stop = true;
        }
      }
    }
    if (near_collision) tr.s_min = std::min(tr.s_min, radius_of(yend.data()));
    if (!stop && dir * (solver.t() - t1) >= 0.0) {
      tr.status = FlowStatus::Completed;
      stop = true;
    }
    if (stop && !cfg.record_steps && tr.times.back() != tend) push(tend, yend.data());
  }
  if (!cfg.record_steps && tr.times.back() != solver.t() && tr.status != FlowStatus::TerminalEvent)
    push(solver.t(), solver.y().data());
  return tr;
}

Trajectory integrate_through_collision(const ReducedState& start, double mu, double h, double delta,
                                       const IntegratorConfig& cfg, const std::vector<EventSpec>& extra_events) {
  if (!(delta > 0)) throw ConfigError("integrate_through_collision: delta must be > 0");
  if (!(start.s > 0 && start.s < 2 * delta)) throw DomainError("integrate_through_collision: need 0 < s < 2 delta");
  std::vector<EventSpec> evs = extra_events;
  evs.push_back({"exit", [delta](double, const double* y) { return y[0] - delta; }, +1, true, 1});
  IntegratorConfig c = cfg;
  if (!std::isfinite(c.max_time)) c.max_time = 1e4;
  ChartState s0{Chart::Reduced, {start.s, start.theta, start.alpha, 0.0}};
  return integrate(FieldId::Reduced, s0, 0.0, c.max_time, mu, h, c, evs);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  const int dim = field_dim(tr.field);
  const bool tau = field_uses_tau(tr.field);
  static const char* names[][4] = {{"q1", "q2", "p1", "p2"},         {"r_hat", "theta_hat", "R_hat", "Theta_hat"},
                                   {"r", "theta", "R", "Theta"},     {"xi", "theta_hat", "R_hat", "Theta_hat"},
                                   {"r", "theta", "v", "u"},         {"s", "theta", "alpha", ""},
                                   {"theta", "alpha", "", ""},       {"s", "beta", "z", ""},
                                   {"s", "iota", "w", ""}};
  const auto& nm = names[static_cast<int>(tr.field)];
  os << (tau ? "tau" : "t");
  for (int k = 0; k < dim; ++k) os << ',' << nm[k];
  if (tau) os << ",t";
  os << ",drift\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    os << fmt::format("{:.17g}", tr.times[i]);
    for (std::size_t k = 0; k < tr.states[i].size(); ++k) os << fmt::format(",{:.17g}", tr.states[i][k]);
    os << fmt::format(",{:.17g}\n", tr.drift[i]);
  }
}

}  // namespace pcrtbp
