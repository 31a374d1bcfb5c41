// Generated once with numpy + statsmodels 0.14.6; do not edit by hand.

pub const AR1: [f64; 250] = [
    0.0,
    -0.5077334709845255,
    -0.19281759272670557,
    -1.9088691585866697,
    -1.0327561574414845,
    -1.0226249166927293,
    -1.4168877661342125,
    -0.865284161162652,
    -2.526172761220337,
    -1.8927338184813924,
    -2.0191985383174194,
    -0.9637436189286425,
    -0.1891787954837318,
    -1.0142878476088413,
    -1.594169446098039,
    -2.533955776257589,
    -2.5064583374671012,
    -1.377106444210671,
    -0.045704144822702186,
    0.26080682158721713,
    0.28436402776620806,
    -0.5983922910071111,
    -0.15010439086065994,
    -0.8447626051281321,
    -0.2727049386910113,
    -0.3114867833238314,
    0.7229773551587508,
    0.7965545011651044,
    2.017413440425275,
    1.0979749608261022,
    1.621527555024904,
    1.460230012592008,
    2.821716828921299,
    0.11914782552585085,
    1.066661773049427,
    -0.16498836893634167,
    -0.8691385972304445,
    -0.5087601331236911,
    -1.7456914542930533,
    -2.2925650445836956,
    -1.9833374061278417,
    -1.5808200159164847,
    -2.877252939231315,
    -2.7517082956992795,
    -1.9331093738957295,
    -1.3431041464976328,
    -1.4574810597707586,
    -0.8763255309458278,
    -0.9758022987478632,
    0.644437169106429,
    -0.20102916363341128,
    0.07838338425559138,
    -0.2717266373013716,
    0.8303538070201258,
    -0.22130084665478456,
    0.8936920402066896,
    -0.39471736485498166,
    -1.4652990525200338,
    -1.39317891037439,
    -0.6990983809908825,
    -1.823392480023586,
    -1.5905641914500244,
    -0.9243653997243354,
    -0.4866134337029989,
    0.7339365329545604,
    1.5000291078537131,
    1.5878516235902156,
    2.232929171564584,
    2.713776628063369,
    1.004481268352163,
    3.1053989669029014,
    2.3448522941315715,
    1.2584542106416046,
    1.7070672691457651,
    0.9353699368086639,
    1.5139159878939856,
    0.09334231440608165,
    1.0286980904599368,
    -0.30278498304643486,
    0.4077830720002644,
    0.3192230895784025,
    -0.028026806532580495,
    0.3864546887908887,
    -0.048790116726566524,
    -0.5470960278737337,
    0.2739392579262303,
    2.3879643279884553,
    0.9418181542241251,
    2.085440024211758,
    2.8153657108589942,
    1.1276757592498305,
    1.2596076368364537,
    1.688764442171475,
    0.5572790455566438,
    1.7583131011011968,
    2.4007289608692393,
    3.6739479685201584,
    3.259597999330289,
    3.5287490559574834,
    4.586240863917396,
    3.720359156647758,
    2.414028619794376,
    0.5519057130721612,
    0.9887888005944236,
    -0.25606437676392946,
    1.2404482950582643,
    1.340478865458059,
    2.0773924723838624,
    1.9478882479195905,
    2.935853133508764,
    1.9357425163730266,
    1.745087484124388,
    2.964676195416098,
    1.162962304600886,
    1.3556008435706788,
    2.2761780004034264,
    0.8847912112041747,
    0.2776348924169878,
    -0.694566574757497,
    1.0585592536287372,
    0.9186119681225127,
    0.6978756826280743,
    -0.5510311219723774,
    -1.0735098742199254,
    0.5540754908629923,
    0.5803865876894122,
    0.3903840818463926,
    1.453166701715804,
    0.5023464584886035,
    2.359020017646009,
    1.6800994743635893,
    1.0630264907398175,
    0.881953411256089,
    1.0607089911077645,
    1.8526648296275132,
    1.0100296783401448,
    0.2979934712631851,
    0.6647527480280637,
    1.2252734042154436,
    2.1589468402840133,
    1.461509614840517,
    2.4200684418348075,
    1.107154984291725,
    2.596786679493843,
    1.1646787912967622,
    1.1710109368853723,
    1.4600019887241815,
    2.4831698018020303,
    3.649386407837413,
    3.0578015404345495,
    4.4931055469089305,
    2.7856484772940946,
    2.740039714581277,
    2.1471271799857736,
    2.5444157293197485,
    1.3012333535648564,
    0.28802622180827764,
    1.962779024001184,
    2.918975669696465,
    3.088401198138537,
    1.9466679738658454,
    2.444738518442817,
    2.6514745145445713,
    3.585495162692145,
    3.241762894732469,
    1.1567149477769563,
    1.0984404628683047,
    1.2494632337544849,
    2.177829413626606,
    1.7907077776885547,
    0.7122783966552756,
    2.168986776504799,
    2.426889664655872,
    1.1273989008037497,
    0.6543401836194775,
    1.9091837169948955,
    0.522061051463582,
    1.871418737943968,
    1.8738651461431168,
    1.7034861833499224,
    2.605526556962703,
    1.9497118556905444,
    1.9735781402696362,
    3.5725064236690383,
    2.2148842001780746,
    3.9341040576748005,
    1.6327564142156186,
    0.8544818468484359,
    2.070054577810698,
    1.360194505016227,
    1.2108009563848927,
    2.2171425843998276,
    3.092805180710535,
    3.2409962441181923,
    2.3163587962765364,
    2.841717935684735,
    2.7380672855063497,
    3.6938284980116345,
    3.576550066157945,
    2.311656434316328,
    2.099770888488372,
    0.5275185372574598,
    1.6115276541033352,
    2.191107594601666,
    2.171545262656028,
    0.7965007390698804,
    0.7936198415551958,
    1.8657363129771531,
    1.7527123306159866,
    1.9810025596871874,
    3.1688776972926207,
    3.491695836425853,
    1.4884430638714352,
    2.054553871349193,
    1.1513266999873628,
    -0.7669701095100812,
    1.2780941860886408,
    0.0670679469092339,
    0.3924077008781668,
    2.187656290639029,
    2.9013778868308786,
    2.63891516037315,
    1.6323786417288324,
    2.1147876961554455,
    2.0910808403526815,
    2.96716182622825,
    3.1502609549964062,
    3.622303658525656,
    1.722996607201926,
    1.0410340126001243,
    1.5854325670414111,
    2.1786847528994135,
    1.6038253013033534,
    1.126857395933031,
    1.4707234313293998,
    1.8664297433686279,
    3.9855232883583014,
    3.1239165784108582,
    3.445205710007678,
    1.4228154895637757,
    1.6225712645412718,
    1.5445583234012337,
    0.5257486123469186,
    0.13341325528976977,
    0.1870450242516517,
    0.09098163998740683,
    -1.0891863362682956,
    -0.33814077993880476,
    0.4153750743734381,
    0.7386109319425653,
];

pub const WALK: [f64; 300] = [
    0.8143385780887049,
    0.6433023141605712,
    0.7425848887239648,
    0.7066832129870697,
    0.8235692620333144,
    -0.23612929383102266,
    -0.5231716844911881,
    1.2688886990151622,
    1.5952562789218085,
    1.431364584691363,
    0.9813053817332584,
    1.359675552852361,
    1.3653477626459958,
    1.581653617155791,
    2.456812727243429,
    2.6012006665533707,
    2.511077851495992,
    1.8973397160286856,
    0.5714673493405162,
    0.998207851071643,
    1.3563332991129002,
    0.696489256982955,
    0.13787226332317348,
    -0.9555332114836885,
    -1.944952825982685,
    -2.2929317080491094,
    -2.3530521355503744,
    -1.4798347279838058,
    -0.9185043283402791,
    -1.4642848728895779,
    -0.6545320490153704,
    -2.603168023613928,
    -2.9961549340175204,
    -2.513468940035226,
    -1.0393480781906304,
    -2.6838711058527696,
    -3.891777587334646,
    -4.390918144315449,
    -5.962243847564167,
    -6.009695718330555,
    -5.750065449247414,
    -6.01909554180068,
    -6.90288117290124,
    -5.027697003399691,
    -3.45263914743634,
    -3.14797088730741,
    -1.6814940921032198,
    -2.4746214620032796,
    -3.804600136542575,
    -3.551975461605447,
    -1.7487304604032978,
    -1.977140407160844,
    -1.2231750684937706,
    0.035595037618734615,
    0.08005970208914223,
    0.921073023348575,
    0.26026697916376784,
    1.5503429272517604,
    1.9714358953470719,
    2.0389386217512686,
    1.4091820465641818,
    -1.446339120326257,
    -1.1274753495928742,
    -1.1245170729210305,
    -1.2406696401031647,
    -1.6379244462857923,
    0.2466573821982232,
    0.15992963457491116,
    0.07829105340125429,
    0.07485350708127467,
    -0.9972246439567941,
    -1.5336443441191845,
    -1.8779043025966449,
    -1.5611403925197442,
    -0.962853969337516,
    -1.7181579973473826,
    -0.661339884141358,
    -3.0514276653376715,
    -1.5375178734810957,
    -0.8792516129220996,
    -0.05297763558084212,
    0.08630168982978906,
    0.4998833794852726,
    0.8311446236134693,
    0.48386262189553747,
    -0.4248613694310311,
    -0.006199141857625934,
    0.26343073330364936,
    -0.4091409445085607,
    -0.35045591642500196,
    -1.0770981241715014,
    1.3176233809890667,
    1.864640765443335,
    2.5104494817523597,
    3.4230088645462065,
    -0.08546440335787642,
    -0.05300832636847707,
    1.0685214463552664,
    -0.04109163173673891,
    0.3230859992288545,
    0.9269467450167623,
    -0.3104812680107316,
    2.8051106481279917,
    2.9140359919336665,
    2.8819431064723573,
    2.954616963726159,
    4.268188209262972,
    6.899618977598512,
    6.4884024767290525,
    4.72667458277636,
    5.386229875753676,
    5.664839446597883,
    7.025453695618003,
    5.660022986437642,
    5.372275193530357,
    5.406443361806691,
    5.216609554728888,
    4.864293945784838,
    4.398718915465453,
    6.086054610687544,
    5.752646209625724,
    6.92440928836964,
    6.8216950364762665,
    7.473401807590636,
    8.663747201873338,
    9.211802099425125,
    7.068303470058865,
    5.932099110720445,
    5.273961459460829,
    5.899130834381032,
    5.07763219835743,
    4.122078314663743,
    5.444835234242187,
    7.5759485668357405,
    6.5373350220000646,
    6.25687124349059,
    6.331005813212505,
    5.175987555682276,
    4.6528572292874895,
    2.954042044108106,
    3.3358262152796305,
    3.0468776742161587,
    1.6724711981669231,
    -0.5943298448226844,
    0.6244892680937468,
    0.6088330277323742,
    -1.716072196083077,
    -1.6663715789616242,
    0.4794450935529633,
    0.42113864268341145,
    1.5961627316098175,
    0.15349757671568853,
    1.2619158382134177,
    -0.16544615314771316,
    0.4238405330311438,
    0.025638392618072103,
    0.32420700268018027,
    1.0472642708140316,
    0.22121987743420024,
    -1.1630522447504408,
    0.607814765204314,
    1.3307244248065864,
    1.889053280595846,
    1.9678657998288933,
    4.170763535902787,
    5.012364401931621,
    3.053482602736805,
    2.9694498976990538,
    3.057144709895156,
    0.6198038646146244,
    -0.8584357493122063,
    0.05590157430606113,
    -0.3947168976229642,
    0.8308350996531313,
    0.2421688796219028,
    -1.2254060086928302,
    1.5216990537849455,
    2.199299489567432,
    1.8920203202217223,
    3.051599440665895,
    2.9536674404943577,
    2.081461963594832,
    2.791747867131112,
    3.060018535685428,
    2.3122464843584107,
    2.4409215420233683,
    1.8012608497362783,
    3.6475659420577617,
    4.311712397080586,
    4.18305304108362,
    3.3861458424680966,
    2.3778863157630945,
    3.96768511601413,
    3.815514645584631,
    4.867047721816616,
    5.751115933790361,
    7.842895663348807,
    7.960050990675336,
    7.787057572711459,
    7.627650934674484,
    7.157172288951005,
    7.807978037122413,
    8.588898145160373,
    9.560834095797762,
    6.155449380691159,
    5.433231231546441,
    4.857801905583051,
    4.056258283200949,
    5.2367861373169555,
    4.709814691553032,
    3.8516734715643857,
    4.165600286580462,
    3.681507437387733,
    3.687638827298087,
    2.967192062586474,
    2.0975118945285267,
    2.7539828553695442,
    2.7316432378609368,
    2.0774732272371637,
    1.9412552339929448,
    2.0891571717920745,
    0.7224414127250554,
    0.9858293624520973,
    1.5458095739206685,
    0.9272868551659907,
    1.1700252432759066,
    -0.8139405860779017,
    -1.3571673688784442,
    -0.7233042214096052,
    -1.0663497775976407,
    -0.045433670801333204,
    0.0696336935888752,
    0.23276265979831604,
    -1.7515584466715328,
    -3.238516747492362,
    -3.57491294696097,
    -3.6881165797896944,
    -2.6514944238631335,
    -2.671066822093156,
    -1.6127286031605073,
    -2.8493165788015786,
    -0.8896474966404095,
    -1.452728554460787,
    -2.4195050741612385,
    -3.5776924652115163,
    -5.174215205743172,
    -4.851188448281319,
    -5.495249374562216,
    -6.624766897668984,
    -7.0572892152148565,
    -7.770013661335849,
    -6.404347678234424,
    -6.803953349862119,
    -6.617691097025692,
    -7.06404510397342,
    -5.64077886047993,
    -6.181237306210381,
    -6.570920655913258,
    -7.853352805060479,
    -7.58304538675677,
    -7.420073816690711,
    -6.044822116474487,
    -4.688349902619878,
    -2.3836017533531533,
    -1.8904628643670283,
    -1.365131166627839,
    -1.6250959493636545,
    -1.300770655042815,
    -2.0760869818636265,
    -2.276233172097824,
    -2.291322444173812,
    -1.611488024151671,
    -0.6878574003647381,
    -1.8183196441748417,
    -2.7349723434280975,
    -3.0262119383079744,
    -3.437239301748442,
    -3.8409823917239994,
    -5.347141599928591,
    -5.421044682332214,
    -5.963118260494943,
    -5.7623850108091395,
    -5.618746038814344,
    -6.584274441900405,
    -6.183236661002232,
    -5.728703886688519,
    -7.29994112724089,
    -6.6837492416937225,
    -7.096013114835774,
    -6.941009238698341,
    -6.910716445250417,
    -7.393983246684968,
    -9.175781243212729,
    -9.135299328083363,
    -9.710652015336505,
    -9.986321178058681,
    -8.563816379828712,
    -10.013310761648308,
    -10.592613821190943,
    -9.88655486833445,
];

pub const NOISE: [f64; 150] = [
    1.6402953458904448,
    2.848303062462221,
    2.762301211834544,
    1.1347786070857462,
    2.9488588994616123,
    1.7737878384275183,
    1.8887170167227996,
    3.128331038866683,
    3.144029031301212,
    1.9061231103396865,
    1.5542258148572452,
    2.032272746075,
    2.4784942486824617,
    1.6631170640636028,
    2.2585560540557017,
    2.049950216605521,
    1.9856830232773628,
    2.501055431027614,
    1.2656423319267445,
    1.3285295805344535,
    1.6481513983874443,
    2.4170770316337973,
    2.3313051461339764,
    1.9135873244872572,
    2.3029768533919874,
    1.3628642855894952,
    1.7082059214354346,
    2.3344098923703736,
    2.7504095772073986,
    1.7429899441816317,
    2.001027026655443,
    1.5281923948467053,
    1.6749881832122444,
    2.1084758306176337,
    2.2808303300847443,
    1.481463554047549,
    1.8470229875860742,
    2.3267329665472882,
    2.6370599799776464,
    1.360604426850705,
    1.7967889391118943,
    1.8709045599736025,
    1.8754615763963383,
    2.12315119661715,
    1.8021578871563377,
    2.094412954786457,
    2.644308578076357,
    2.6410946843821677,
    1.7505499732471204,
    1.9025988538664502,
    2.2817653984907973,
    1.7989152954168366,
    1.7374372306758878,
    1.5267541063197203,
    1.7079722263835868,
    1.526721415977281,
    1.581966515410461,
    1.6629423666489505,
    1.9324359456418487,
    2.8827026514956637,
    2.8081749670674503,
    2.176643035985639,
    2.2032571677232236,
    2.3299325046151376,
    1.9730341067768578,
    1.8465130758295296,
    2.7059865099652782,
    1.3006818114657572,
    2.5960112794229238,
    1.5494673092521918,
    1.1543936676131719,
    2.348416139236228,
    1.5808283066491036,
    0.7147541857646138,
    2.197885892842465,
    2.191940584754255,
    1.9489085097391166,
    2.396010334321702,
    1.4421955927011423,
    2.043869436510789,
    2.6578800052278675,
    2.0631448065130975,
    1.9446765727888407,
    1.6357955364597272,
    1.9160034287041339,
    2.109612517505689,
    1.6103258935988325,
    1.7729156784274016,
    1.752813682892171,
    1.9785293029873845,
    2.2954803056588187,
    2.0754903496512678,
    2.4117688366769197,
    1.8973895368440776,
    2.2896390708884375,
    1.954264967939561,
    1.5555124413047192,
    1.4189207937200017,
    1.151602270190126,
    2.869443743412164,
    1.243616737799654,
    1.3555776528102355,
    1.3372238111196946,
    2.145588494691275,
    2.4051445100009095,
    2.0287896910536873,
    2.8176561754007046,
    2.03733922551362,
    2.101425155229952,
    2.1017488809596085,
    1.7710347134152125,
    1.9600515635714688,
    2.3932812151039027,
    1.5992919327661186,
    1.9096020833282348,
    2.109261215141503,
    2.0865107250189983,
    1.945198123293281,
    1.3898957868149842,
    2.354634863466175,
    1.8959693602393153,
    3.6796149506540825,
    1.1981321641524785,
    2.724270401787961,
    2.561740268558064,
    2.4876552014638973,
    1.6985849140537133,
    1.8232490708959308,
    1.9651027720435597,
    1.7189347808211186,
    1.872271331993169,
    1.5992742558579331,
    1.6069976262886232,
    2.577728801129658,
    0.7856069071825147,
    2.223796527908458,
    2.241531639366608,
    3.195731584313272,
    1.4787219085877128,
    1.5209840889101347,
    2.7386720276345504,
    2.1946061237559045,
    1.4658797776653385,
    2.3823591654042655,
    1.7792029540583447,
    2.391788832384295,
    1.4946977422359367,
    2.310489347033219,
    3.0055847742222688,
    1.6409023086285313,
];

pub const MILD: [f64; 200] = [
    0.0,
    -2.080800796885199,
    1.3355001718665362,
    0.8100256996569745,
    1.323561264853402,
    -0.41907631827928205,
    0.9129686415445739,
    -1.0106526686558661,
    -1.3595244528049566,
    -0.956909605799806,
    3.1075117950912907,
    0.2769390503436934,
    1.68764050502763,
    0.059685338035745786,
    0.27578081615595573,
    -0.41509675442110594,
    -1.0327715421545494,
    2.185001771760785,
    1.4826999392380589,
    2.1783241159259936,
    2.938085150045106,
    1.9834817217957905,
    0.1347621648548666,
    0.8937040647058664,
    -0.4278513075456547,
    -0.24149890512911773,
    2.0658439326868896,
    2.88929793067808,
    1.1264054060469637,
    -0.2929712994790634,
    -1.1567437233248632,
    0.779875246366603,
    0.577452564844741,
    1.332086580277195,
    1.281536826218725,
    1.138842418002807,
    0.10912662258403438,
    2.118161136136202,
    0.1895800933326752,
    1.7513876253574583,
    1.1930907092906569,
    1.6419682529198123,
    1.3353687080182848,
    -0.20142280489171963,
    0.7100166391582057,
    0.4540007916076862,
    -0.14120931403357334,
    0.08931776334810566,
    0.2642391812921151,
    -0.08973697363200622,
    -0.83104593227514,
    -0.8007023323021727,
    0.9595546844041498,
    -1.0505977455583546,
    -0.4283188233008127,
    0.109367546142184,
    0.4878864380294452,
    -0.04260717764666691,
    -0.9639761240923184,
    -0.7363359556608777,
    -0.08451585372797688,
    -1.1955607273940976,
    0.47285994166401635,
    0.21732006414946445,
    -0.9990875179747989,
    -1.3678443397547986,
    -0.13869433912956708,
    1.0851866972057793,
    0.8802987914249168,
    0.32352602701519306,
    -0.28023798640045094,
    -0.6241130481808577,
    -1.1064559153408084,
    -0.5278370598177493,
    0.9969596556367664,
    0.7037926734544889,
    0.051399848476067767,
    -0.27748835228025853,
    0.6325358479709977,
    0.9049762063219071,
    2.226074997425098,
    2.790752824398308,
    1.0090322853845752,
    1.3012764035308846,
    0.1426559974161336,
    0.18240389103347204,
    0.4880050246128219,
    0.1032130412764466,
    -0.18137458027219056,
    0.6098676055142519,
    2.045657203431898,
    1.6112153660884667,
    1.9762508781501205,
    0.8340142350862086,
    1.0675489009457042,
    1.8225901358277548,
    2.0542563324755774,
    1.633466289974875,
    0.13575637857569223,
    -1.6170390573882059,
    -0.48751112767009996,
    -1.2735179509617822,
    0.6986113995061695,
    -0.4982289057512159,
    0.6958553067446125,
    -1.5583136841327576,
    -1.3477665088626636,
    -0.34054959269376933,
    1.4927519320583886,
    1.484016981015455,
    0.7326792523433563,
    1.545094320555295,
    1.8357074702711706,
    1.2737931694343223,
    1.2457510132477725,
    1.6520317521147625,
    0.5172828498237774,
    0.9981794274401159,
    1.4442538649878507,
    1.6552851767140777,
    2.1467694562974904,
    1.8934560589987042,
    3.239561702601271,
    1.8482624724660879,
    1.3092195935759936,
    1.0606373083013887,
    -0.04445622457691789,
    0.2978051898622657,
    -0.24509452245489327,
    0.4298954394924265,
    -0.07091721931601391,
    -0.28979041829670704,
    0.6833721608965281,
    0.6954740469964645,
    -0.7072662153031644,
    -1.100299819003031,
    -1.537299722485796,
    -0.5211938288958295,
    -1.1813660687615244,
    0.9013718223247499,
    -0.10750625356206078,
    0.6412943570214653,
    1.9601283121658082,
    1.2842715980793098,
    0.19605715079081054,
    -0.7454681131409925,
    -0.7561724296684084,
    -1.2022094327941808,
    -1.4142520721785123,
    -0.45313361020218423,
    0.6442694831815997,
    1.693622714031405,
    0.5671080551273101,
    0.005346494421845205,
    0.22203804648464337,
    0.8863945344778018,
    0.00740101743359578,
    0.5819746158221855,
    0.4515844640876324,
    1.4541494873748235,
    0.030236596740551236,
    2.5539709041142027,
    0.7820556817108905,
    -1.3115373690503769,
    0.43103588423401074,
    1.8467382433801571,
    0.8940758201238697,
    0.045568404011682384,
    1.2215369417286817,
    1.3611451435696973,
    2.0368487729711044,
    0.8461622466396547,
    -1.107850357305475,
    -0.6911878303105669,
    -0.07660070782843298,
    1.351631501900382,
    2.1938167587242328,
    0.0806545592390342,
    0.5527771856574546,
    0.7996315453592036,
    1.3205265562435826,
    2.144851603338762,
    1.8683646048550386,
    2.1168175764980277,
    -0.32863168841355184,
    2.352322634445003,
    3.639082479504493,
    2.809082235958683,
    3.190341035616547,
    2.0211140576733806,
    1.2936269665067222,
    -0.3526882390092012,
    -1.0471232741089427,
    0.5961574823473874,
    2.112146785935237,
    1.9825600130130023,
    3.015897535428131,
    1.7208973815585669,
    1.773655804219131,
    3.329122060973919,
];

/// (series, constant+trend, max_lag, statistic, p-value, lag)
pub const ADF_CASES: [(&str, bool, usize, f64, f64, usize); 6] = [
    ("AR1", true, 15, -4.898722580092496, 0.0003133440840015489, 1),
    ("AR1", false, 15, -4.086848117129408, 0.0010181573215990822, 1),
    ("WALK", false, 15, -1.5044840659593053, 0.5312919808344645, 0),
    ("WALK", true, 15, -1.8359562897119357, 0.6871677938149487, 0),
    ("NOISE", false, 3, -13.168096444562513, 1.2667719330539876e-24, 0),
    ("MILD", true, 14, -8.068189508300486, 4.9700581107440253e-11, 0),
];

/// (series, trend, lags, statistic, p-value)
pub const KPSS_CASES: [(&str, bool, usize, f64, f64); 7] = [
    ("AR1", false, 5, 1.95257291073746, 0.01),
    ("AR1", true, 5, 0.2919040020725562, 0.01),
    ("WALK", false, 5, 1.078298389622115, 0.01),
    ("WALK", true, 5, 0.7737846977267195, 0.01),
    ("NOISE", false, 4, 0.08470146974046636, 0.1),
    ("MILD", false, 4, 0.37302389924480445, 0.08878280204965325),
    ("MILD", true, 4, 0.1329820858771971, 0.07410724837556093),
];
