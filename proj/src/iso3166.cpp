#include <optional>
#include <string>
#include <unordered_map>

#include "ramangeo/metrics.hpp"

namespace ramangeo::metrics {

namespace {

// Natural Earth admin-0 "ADMIN" names (current and legacy spellings) mapped
// to ISO 3166-1 alpha-3 codes.
const std::unordered_map<std::string, std::string>& name_to_alpha3() {
    static const std::unordered_map<std::string, std::string> table = {
        {"Afghanistan", "AFG"},
        {"Albania", "ALB"},
        {"Algeria", "DZA"},
        {"Andorra", "AND"},
        {"Angola", "AGO"},
        {"Antarctica", "ATA"},
        {"Antigua and Barbuda", "ATG"},
        {"Argentina", "ARG"},
        {"Armenia", "ARM"},
        {"Australia", "AUS"},
        {"Austria", "AUT"},
        {"Azerbaijan", "AZE"},
        {"The Bahamas", "BHS"},
        {"Bahamas", "BHS"},
        {"Bahrain", "BHR"},
        {"Bangladesh", "BGD"},
        {"Barbados", "BRB"},
        {"Belarus", "BLR"},
        {"Belgium", "BEL"},
        {"Belize", "BLZ"},
        {"Benin", "BEN"},
        {"Bhutan", "BTN"},
        {"Bolivia", "BOL"},
        {"Bosnia and Herzegovina", "BIH"},
        {"Botswana", "BWA"},
        {"Brazil", "BRA"},
        {"Brunei", "BRN"},
        {"Bulgaria", "BGR"},
        {"Burkina Faso", "BFA"},
        {"Burundi", "BDI"},
        {"Cabo Verde", "CPV"},
        {"Cape Verde", "CPV"},
        {"Cambodia", "KHM"},
        {"Cameroon", "CMR"},
        {"Canada", "CAN"},
        {"Central African Republic", "CAF"},
        {"Chad", "TCD"},
        {"Chile", "CHL"},
        {"China", "CHN"},
        {"Colombia", "COL"},
        {"Comoros", "COM"},
        {"Costa Rica", "CRI"},
        {"Croatia", "HRV"},
        {"Cuba", "CUB"},
        {"Cyprus", "CYP"},
        {"Czechia", "CZE"},
        {"Czech Republic", "CZE"},
        {"Democratic Republic of the Congo", "COD"},
        {"Dem. Rep. Congo", "COD"},
        {"Republic of the Congo", "COG"},
        {"Republic of Congo", "COG"},
        {"Congo", "COG"},
        {"Denmark", "DNK"},
        {"Djibouti", "DJI"},
        {"Dominica", "DMA"},
        {"Dominican Republic", "DOM"},
        {"East Timor", "TLS"},
        {"Timor-Leste", "TLS"},
        {"Ecuador", "ECU"},
        {"Egypt", "EGY"},
        {"El Salvador", "SLV"},
        {"Equatorial Guinea", "GNQ"},
        {"Eritrea", "ERI"},
        {"Estonia", "EST"},
        {"eSwatini", "SWZ"},
        {"Swaziland", "SWZ"},
        {"Ethiopia", "ETH"},
        {"Falkland Islands", "FLK"},
        {"Fiji", "FJI"},
        {"Finland", "FIN"},
        {"France", "FRA"},
        {"French Southern and Antarctic Lands", "ATF"},
        {"Gabon", "GAB"},
        {"Gambia", "GMB"},
        {"The Gambia", "GMB"},
        {"Georgia", "GEO"},
        {"Germany", "DEU"},
        {"Ghana", "GHA"},
        {"Greece", "GRC"},
        {"Greenland", "GRL"},
        {"Grenada", "GRD"},
        {"Guatemala", "GTM"},
        {"Guinea", "GIN"},
        {"Guinea-Bissau", "GNB"},
        {"Guyana", "GUY"},
        {"Haiti", "HTI"},
        {"Honduras", "HND"},
        {"Hungary", "HUN"},
        {"Iceland", "ISL"},
        {"India", "IND"},
        {"Indonesia", "IDN"},
        {"Iran", "IRN"},
        {"Iraq", "IRQ"},
        {"Ireland", "IRL"},
        {"Israel", "ISR"},
        {"Italy", "ITA"},
        {"Ivory Coast", "CIV"},
        {"Jamaica", "JAM"},
        {"Japan", "JPN"},
        {"Jordan", "JOR"},
        {"Kazakhstan", "KAZ"},
        {"Kenya", "KEN"},
        {"Kiribati", "KIR"},
        {"Kuwait", "KWT"},
        {"Kyrgyzstan", "KGZ"},
        {"Laos", "LAO"},
        {"Latvia", "LVA"},
        {"Lebanon", "LBN"},
        {"Lesotho", "LSO"},
        {"Liberia", "LBR"},
        {"Libya", "LBY"},
        {"Liechtenstein", "LIE"},
        {"Lithuania", "LTU"},
        {"Luxembourg", "LUX"},
        {"Madagascar", "MDG"},
        {"Malawi", "MWI"},
        {"Malaysia", "MYS"},
        {"Maldives", "MDV"},
        {"Mali", "MLI"},
        {"Malta", "MLT"},
        {"Marshall Islands", "MHL"},
        {"Mauritania", "MRT"},
        {"Mauritius", "MUS"},
        {"Mexico", "MEX"},
        {"Micronesia", "FSM"},
        {"Federated States of Micronesia", "FSM"},
        {"Moldova", "MDA"},
        {"Monaco", "MCO"},
        {"Mongolia", "MNG"},
        {"Montenegro", "MNE"},
        {"Morocco", "MAR"},
        {"Mozambique", "MOZ"},
        {"Myanmar", "MMR"},
        {"Namibia", "NAM"},
        {"Nauru", "NRU"},
        {"Nepal", "NPL"},
        {"Netherlands", "NLD"},
        {"New Caledonia", "NCL"},
        {"New Zealand", "NZL"},
        {"Nicaragua", "NIC"},
        {"Niger", "NER"},
        {"Nigeria", "NGA"},
        {"North Korea", "PRK"},
        {"North Macedonia", "MKD"},
        {"Macedonia", "MKD"},
        {"Norway", "NOR"},
        {"Oman", "OMN"},
        {"Pakistan", "PAK"},
        {"Palau", "PLW"},
        {"Palestine", "PSE"},
        {"Panama", "PAN"},
        {"Papua New Guinea", "PNG"},
        {"Paraguay", "PRY"},
        {"Peru", "PER"},
        {"Philippines", "PHL"},
        {"Poland", "POL"},
        {"Portugal", "PRT"},
        {"Puerto Rico", "PRI"},
        {"Qatar", "QAT"},
        {"Romania", "ROU"},
        {"Russia", "RUS"},
        {"Russian Federation", "RUS"},
        {"Rwanda", "RWA"},
        {"Saint Kitts and Nevis", "KNA"},
        {"Saint Lucia", "LCA"},
        {"Saint Vincent and the Grenadines", "VCT"},
        {"Samoa", "WSM"},
        {"San Marino", "SMR"},
        {"Sao Tome and Principe", "STP"},
        {"São Tomé and Principe", "STP"},
        {"Saudi Arabia", "SAU"},
        {"Senegal", "SEN"},
        {"Republic of Serbia", "SRB"},
        {"Serbia", "SRB"},
        {"Seychelles", "SYC"},
        {"Sierra Leone", "SLE"},
        {"Singapore", "SGP"},
        {"Slovakia", "SVK"},
        {"Slovenia", "SVN"},
        {"Solomon Islands", "SLB"},
        {"Somalia", "SOM"},
        {"South Africa", "ZAF"},
        {"South Korea", "KOR"},
        {"South Sudan", "SSD"},
        {"Spain", "ESP"},
        {"Sri Lanka", "LKA"},
        {"Sudan", "SDN"},
        {"Suriname", "SUR"},
        {"Sweden", "SWE"},
        {"Switzerland", "CHE"},
        {"Syria", "SYR"},
        {"Taiwan", "TWN"},
        {"Tajikistan", "TJK"},
        {"United Republic of Tanzania", "TZA"},
        {"Tanzania", "TZA"},
        {"Thailand", "THA"},
        {"Togo", "TGO"},
        {"Tonga", "TON"},
        {"Trinidad and Tobago", "TTO"},
        {"Tunisia", "TUN"},
        {"Turkey", "TUR"},
        {"Turkmenistan", "TKM"},
        {"Tuvalu", "TUV"},
        {"Uganda", "UGA"},
        {"Ukraine", "UKR"},
        {"United Arab Emirates", "ARE"},
        {"United Kingdom", "GBR"},
        {"United States of America", "USA"},
        {"United States", "USA"},
        {"Uruguay", "URY"},
        {"Uzbekistan", "UZB"},
        {"Vanuatu", "VUT"},
        {"Vatican", "VAT"},
        {"Venezuela", "VEN"},
        {"Vietnam", "VNM"},
        {"Western Sahara", "ESH"},
        {"Yemen", "YEM"},
        {"Zambia", "ZMB"},
        {"Zimbabwe", "ZWE"},
    };
    return table;
}

} // namespace

std::optional<std::string> iso3166_alpha3(const std::string& country_name) {
    const auto& table = name_to_alpha3();
    const auto it = table.find(country_name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

} // namespace ramangeo::metrics
