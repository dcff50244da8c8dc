//! Tone curve applied by the mock stylizer, one row per RGB channel.
//!
//! Warm highlights, lifted blacks and a mild S-shaped contrast boost,
//! approximating the look of daylight footage. The table is frozen data;
//! stylized outputs are only reproducible while it stays unchanged.

#[rustfmt::skip]
pub const TONE_LUT: [[u8; 256]; 3] = [
    // R
    [
          6,   7,   7,   8,   9,   9,  10,  11,  11,  12,  13,  13,  14,  15,  15,  16,
         17,  18,  18,  19,  20,  21,  22,  22,  23,  24,  25,  26,  27,  28,  28,  29,
         30,  31,  32,  33,  34,  35,  36,  37,  38,  39,  40,  41,  42,  43,  44,  45,
         46,  47,  48,  49,  50,  51,  52,  53,  54,  55,  56,  57,  58,  59,  60,  61,
         63,  64,  65,  66,  67,  68,  69,  70,  71,  73,  74,  75,  76,  77,  78,  79,
         81,  82,  83,  84,  85,  86,  88,  89,  90,  91,  92,  93,  95,  96,  97,  98,
         99, 100, 102, 103, 104, 105, 106, 108, 109, 110, 111, 112, 114, 115, 116, 117,
        118, 120, 121, 122, 123, 124, 126, 127, 128, 129, 130, 132, 133, 134, 135, 136,
        137, 139, 140, 141, 142, 143, 145, 146, 147, 148, 149, 150, 152, 153, 154, 155,
        156, 157, 158, 160, 161, 162, 163, 164, 165, 166, 167, 169, 170, 171, 172, 173,
        174, 175, 176, 177, 178, 180, 181, 182, 183, 184, 185, 186, 187, 188, 189, 190,
        191, 192, 193, 194, 195, 196, 197, 198, 199, 200, 201, 202, 203, 204, 205, 206,
        207, 208, 209, 210, 210, 211, 212, 213, 214, 215, 216, 217, 217, 218, 219, 220,
        221, 222, 222, 223, 224, 225, 226, 226, 227, 228, 229, 229, 230, 231, 232, 232,
        233, 234, 234, 235, 236, 236, 237, 238, 238, 239, 239, 240, 241, 241, 242, 242,
        243, 243, 244, 245, 245, 246, 246, 246, 247, 247, 248, 248, 249, 249, 250, 250,
    ],
    // G
    [
          4,   5,   5,   6,   6,   7,   7,   8,   8,   9,   9,  10,  11,  11,  12,  13,
         13,  14,  15,  15,  16,  17,  17,  18,  19,  20,  20,  21,  22,  23,  23,  24,
         25,  26,  27,  28,  28,  29,  30,  31,  32,  33,  34,  35,  35,  36,  37,  38,
         39,  40,  41,  42,  43,  44,  45,  46,  47,  48,  49,  50,  51,  52,  53,  54,
         55,  56,  57,  58,  59,  60,  61,  62,  64,  65,  66,  67,  68,  69,  70,  71,
         72,  74,  75,  76,  77,  78,  79,  80,  81,  83,  84,  85,  86,  87,  88,  90,
         91,  92,  93,  94,  95,  97,  98,  99, 100, 101, 103, 104, 105, 106, 107, 108,
        110, 111, 112, 113, 114, 116, 117, 118, 119, 120, 122, 123, 124, 125, 126, 128,
        129, 130, 131, 132, 134, 135, 136, 137, 138, 140, 141, 142, 143, 144, 146, 147,
        148, 149, 150, 151, 153, 154, 155, 156, 157, 158, 160, 161, 162, 163, 164, 165,
        166, 168, 169, 170, 171, 172, 173, 174, 175, 176, 178, 179, 180, 181, 182, 183,
        184, 185, 186, 187, 188, 189, 190, 191, 192, 193, 194, 195, 196, 197, 198, 199,
        200, 201, 202, 203, 204, 205, 206, 207, 208, 209, 210, 211, 212, 213, 213, 214,
        215, 216, 217, 218, 219, 219, 220, 221, 222, 223, 223, 224, 225, 226, 227, 227,
        228, 229, 229, 230, 231, 232, 232, 233, 234, 234, 235, 236, 236, 237, 237, 238,
        239, 239, 240, 240, 241, 241, 242, 242, 243, 243, 244, 244, 245, 245, 246, 246,
    ],
    // B
    [
          8,   8,   9,   9,   9,  10,  10,  10,  11,  11,  12,  12,  13,  13,  14,  14,
         14,  15,  15,  16,  17,  17,  18,  18,  19,  19,  20,  21,  21,  22,  22,  23,
         24,  24,  25,  26,  26,  27,  28,  28,  29,  30,  31,  31,  32,  33,  34,  34,
         35,  36,  37,  38,  38,  39,  40,  41,  42,  43,  43,  44,  45,  46,  47,  48,
         49,  50,  51,  51,  52,  53,  54,  55,  56,  57,  58,  59,  60,  61,  62,  63,
         64,  65,  66,  67,  68,  69,  70,  71,  72,  73,  74,  75,  76,  77,  78,  80,
         81,  82,  83,  84,  85,  86,  87,  88,  89,  90,  92,  93,  94,  95,  96,  97,
         98,  99, 101, 102, 103, 104, 105, 106, 107, 109, 110, 111, 112, 113, 114, 116,
        117, 118, 119, 120, 121, 122, 124, 125, 126, 127, 128, 129, 131, 132, 133, 134,
        135, 136, 138, 139, 140, 141, 142, 143, 145, 146, 147, 148, 149, 150, 151, 153,
        154, 155, 156, 157, 158, 159, 160, 162, 163, 164, 165, 166, 167, 168, 169, 170,
        172, 173, 174, 175, 176, 177, 178, 179, 180, 181, 182, 183, 184, 185, 186, 187,
        188, 189, 190, 191, 192, 193, 194, 195, 196, 197, 198, 199, 200, 201, 202, 203,
        204, 205, 206, 206, 207, 208, 209, 210, 211, 212, 212, 213, 214, 215, 216, 216,
        217, 218, 219, 219, 220, 221, 222, 222, 223, 224, 224, 225, 226, 226, 227, 228,
        228, 229, 229, 230, 231, 231, 232, 232, 233, 233, 234, 234, 235, 235, 236, 236,
    ],
];
