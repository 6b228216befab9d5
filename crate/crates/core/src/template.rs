//! Canonical neutral face in the 68-point layout.
//!
//! Coordinates are mouth-centered (midpoint of landmarks 62 and 66 at the
//! origin) and scaled to unit face height, y pointing down.

pub const NEUTRAL_FACE: [[f64; 2]; 68] = [
    [-0.5060, -0.4860], // 0
    [-0.5018, -0.3520], // 1
    [-0.4860, -0.2169], // 2
    [-0.4571, -0.0845], // 3
    [-0.4041, 0.0389],  // 4
    [-0.3232, 0.1475],  // 5
    [-0.2254, 0.2401],  // 6
    [-0.1154, 0.3155],  // 7
    [0.0092, 0.3354],   // 8
    [0.1339, 0.3115],   // 9
    [0.2441, 0.2346],   // 10
    [0.3424, 0.1406],   // 11
    [0.4224, 0.0300],   // 12
    [0.4732, -0.0963],  // 13
    [0.4979, -0.2321],  // 14
    [0.5087, -0.3693],  // 15
    [0.5094, -0.5055],  // 16
    [-0.4096, -0.5885], // 17
    [-0.3482, -0.6396], // 18
    [-0.2646, -0.6532], // 19
    [-0.1779, -0.6404], // 20
    [-0.0961, -0.6068], // 21
    [0.0714, -0.6125],  // 22
    [0.1553, -0.6491],  // 23
    [0.2433, -0.6646],  // 24
    [0.3296, -0.6527],  // 25
    [0.3951, -0.6043],  // 26
    [-0.0095, -0.5094], // 27
    [-0.0085, -0.4211], // 28
    [-0.0075, -0.3328], // 29
    [-0.0063, -0.2425], // 30
    [-0.1025, -0.1845], // 31
    [-0.0549, -0.1655], // 32
    [-0.0034, -0.1501], // 33
    [0.0480, -0.1677],  // 34
    [0.0949, -0.1873],  // 35
    [-0.3088, -0.4953], // 36
    [-0.2562, -0.5276], // 37
    [-0.1912, -0.5272], // 38
    [-0.1366, -0.4866], // 39
    [-0.1949, -0.4737], // 40
    [-0.2583, -0.4732], // 41
    [0.1225, -0.4918],  // 42
    [0.1769, -0.5347],  // 43
    [0.2416, -0.5367],  // 44
    [0.2950, -0.5064],  // 45
    [0.2466, -0.4830],  // 46
    [0.1836, -0.4809],  // 47
    [-0.1941, -0.0227], // 48
    [-0.1242, -0.0536], // 49
    [-0.0524, -0.0675], // 50
    [-0.0011, -0.0558], // 51
    [0.0525, -0.0691],  // 52
    [0.1269, -0.0575],  // 53
    [0.2001, -0.0304],  // 54
    [0.1318, 0.0445],   // 55
    [0.0600, 0.0789],   // 56
    [0.0019, 0.0860],   // 57
    [-0.0538, 0.0812],  // 58
    [-0.1251, 0.0500],  // 59
    [-0.1635, -0.0184], // 60
    [-0.0521, -0.0239], // 61
    [-0.0004, -0.0196], // 62
    [0.0539, -0.0260],  // 63
    [0.1693, -0.0250],  // 64
    [0.0556, 0.0119],   // 65
    [0.0004, 0.0196],   // 66
    [-0.0525, 0.0177],  // 67
];
