"""Independent oracles for the constants frozen into the C++ tests.

Run with: python3 tests/oracles/frozen_values.py
Uses mpmath / numpy only; nothing here calls the library.
"""
import mpmath as mp
import numpy as np

mp.mp.dps = 40
h = mp.mpf("6.62607015e-34")
kB = mp.mpf("1.380649e-23")
hbar = h / (2 * mp.pi)


def g_filter(n, x, r=0.0):
    """g_N with x = omega*tau, r = tau_pi/tau, by direct summation."""
    y = 1 + (-1) ** (1 + n) * np.exp(1j * x)
    for j in range(1, n + 1):
        y += 2 * (-1) ** j * np.exp(1j * x * (j - 0.5) / n) * np.cos(x * r / 2)
    return abs(y) ** 2 / x**2


def dense_peak(n, tau, lo=0.05, hi=3.0, pts=4_000_001):
    w0 = 2 * np.pi * n / (2 * tau)
    w = np.linspace(lo * w0, hi * w0, pts)
    gv = g_filter(n, w * tau)
    i = int(np.argmax(gv))
    half = gv[i] / 2
    left = i
    while gv[left] > half:
        left -= 1
    right = i
    while gv[right] > half:
        right += 1
    return w[i] / (2 * np.pi), w[right] - w[left], gv[i]


print("qubit_frequency(0.167 mV) =", mp.sqrt(mp.mpf("5.065e9") ** 2 + (mp.mpf("2.348e12") * mp.mpf("0.167e-3")) ** 2))

fc = mp.mpf("5.065e9") + mp.mpf("15.9e6")
c = mp.mpf("2.348e12")
dv = mp.sqrt(fc**2 - mp.mpf("5.065e9") ** 2) / c
print("lever at 15.9 MHz detune [Hz/V] =", c**2 * dv / fc)

for n, tau in [(1, 40e-6), (2, 40e-6), (4, 40e-6), (8, 100e-6)]:
    f, dw, gp = dense_peak(n, tau)
    print(f"peak N={n} tau={tau}: f={f:.6f} Hz  fwhm={dw:.6f} rad/s  g={gp:.9f}")

x = np.linspace(1e-6, 4 * np.pi * 8, 4_000_001)
g8 = g_filter(8, x)
print("g_8 nominal / global max =", g_filter(8, np.array([np.pi * 8]))[0] / g8.max())

fq = mp.mpf("5.065e9")
print("T1 ratio at 200 mK =", mp.tanh(h * fq / (2 * kB * mp.mpf("0.2"))))
print("h f_q / k_B [K] =", h * fq / kB)
fr = mp.mpf("5.668e9")
nth = 1 / (mp.e ** (h * fr / (kB * mp.mpf("0.2"))) - 1)
kappa = 2 * mp.pi * mp.mpf("0.38e6")
chi = -mp.pi * mp.mpf("0.12e6")
root = mp.sqrt((1 + 2j * chi / kappa) ** 2 + 8j * chi * nth / kappa)
print("n_th(5.668 GHz, 200 mK) =", nth)
print("resonator dephasing rate =", kappa / 2 * mp.re(root - 1))

lk = hbar * mp.mpf("64.42") / (mp.pi * mp.mpf("1.76") * kB * mp.mpf("3.8"))
print("L_k =", lk)
ll = lk / mp.mpf("0.3e-6")
ld = 2 * ll * mp.mpf("1061e-6") / mp.pi**2
w = 2 * mp.pi * mp.mpf("5.6681e9")
cd = 1 / (w**2 * ld)
print("L_diff, C_diff, Z =", ld, cd, mp.sqrt(ld / cd))
print("coupling ratio =", mp.mpf("5.6681e9") * mp.sqrt(598.5) / (mp.mpf("6.42e9") * mp.sqrt(57.3)))
k = 2 * mp.pi * mp.mpf("0.38e6"); g = 2 * mp.pi * mp.mpf("6.43e6"); d = 2 * mp.pi * (mp.mpf("5.668e9") - mp.mpf("5.065e9"))
print("1/Purcell [s] =", 1 / (k * g**2 / d**2))
print("S_v [uV^2/Hz] =", mp.mpf(1e6) / (mp.mpf("180.7e9")) ** 2 * mp.mpf(1e12))
print("transverse S(T1=11.6us) =", 2 / (mp.pi * mp.mpf("11.6e-6")))
